//! Plain-text rendering of the CSV files the other verbs write.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use jd2p::sim::{ledger_from_csv, read_table};
use jd2p::{Error, Result};

/// Renders one CSV file, or every CSV file of a directory in name order.
pub fn report(path: &Path) -> Result<String> {
    let mut files = Vec::new();
    if path.is_dir() {
        let entries = std::fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        for entry in entries {
            let p = entry.map_err(|e| Error::io(path, e))?.path();
            if p.extension().is_some_and(|x| x == "csv") {
                files.push(p);
            }
        }
        files.sort();
        if files.is_empty() {
            return Err(Error::Config(format!("no CSV files in {}", path.display())));
        }
    } else {
        files.push(path.to_path_buf());
    }
    let mut out = String::new();
    for f in files {
        let text = std::fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?;
        let name = f
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        writeln!(out, "== {name}").unwrap();
        out.push_str(&render(&text)?);
        out.push('\n');
    }
    Ok(out)
}

/// Picks the layout from the header row.
pub fn render(text: &str) -> Result<String> {
    let (header, rows) = read_table(text)?;
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    if h == ["method", "x", "metric", "mean", "stderr", "n"] {
        Ok(render_experiment(&rows))
    } else if h.first() == Some(&"round") && h.contains(&"cumulative_energy") {
        render_ledger(text)
    } else {
        Ok(render_plain(&header, &rows))
    }
}

/// A metric's methods in first-seen order and its `(x index, method) -> cell` map.
type MetricTable = (String, Vec<String>, BTreeMap<(usize, String), String>);

fn render_experiment(rows: &[Vec<String>]) -> String {
    let mut by_metric: Vec<MetricTable> = Vec::new();
    let mut xs: Vec<String> = Vec::new();
    for r in rows {
        let (method, x, metric) = (&r[0], &r[1], &r[2]);
        if !xs.contains(x) {
            xs.push(x.clone());
        }
        let xi = xs.iter().position(|v| v == x).unwrap();
        let entry = match by_metric.iter_mut().position(|(m, _, _)| m == metric) {
            Some(i) => &mut by_metric[i],
            None => {
                by_metric.push((metric.clone(), Vec::new(), BTreeMap::new()));
                by_metric.last_mut().unwrap()
            }
        };
        if !entry.1.contains(method) {
            entry.1.push(method.clone());
        }
        let cell = match r[4].parse::<f64>() {
            Ok(s) if s > 0.0 => format!("{} ± {}", short(&r[3]), short(&r[4])),
            _ => short(&r[3]),
        };
        entry.2.insert((xi, method.clone()), cell);
    }
    let mut out = String::new();
    for (metric, methods, cells) in by_metric {
        let mut header = vec!["x".to_string()];
        header.extend(methods.iter().cloned());
        let table: Vec<Vec<String>> = (0..xs.len())
            .filter(|&xi| methods.iter().any(|m| cells.contains_key(&(xi, m.clone()))))
            .map(|xi| {
                let mut row = vec![xs[xi].clone()];
                row.extend(
                    methods
                        .iter()
                        .map(|m| cells.get(&(xi, m.clone())).cloned().unwrap_or_default()),
                );
                row
            })
            .collect();
        writeln!(out, "{metric}").unwrap();
        out.push_str(&render_plain(&header, &table));
    }
    out
}

fn render_ledger(text: &str) -> Result<String> {
    let ledger = ledger_from_csv(text)?;
    let (header, rows) = read_table(text)?;
    let mut out = render_plain(&header, &rows);
    let total = ledger.last().map_or(0.0, |r| r.cumulative_energy);
    let sent: usize = ledger.iter().map(|r| r.offloaded + r.prefetched).sum();
    let wasted: usize = ledger.iter().map(|r| r.wasted).sum();
    writeln!(out, "total energy {total:.6e} J, {sent} features sent, {wasted} wasted").unwrap();
    Ok(out)
}

/// Four significant digits for anything that parses as a float.
fn short(s: &str) -> String {
    match s.parse::<f64>() {
        Ok(v) if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e6) => format!("{v:.4e}"),
        Ok(v) if v.fract() != 0.0 => format!("{v:.4}"),
        _ => s.to_string(),
    }
}

fn render_plain(header: &[String], rows: &[Vec<String>]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|c| short(c)).collect()).collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|j| {
            cells
                .iter()
                .map(|r| r.get(j).map_or(0, |c| c.chars().count()))
                .chain([header[j].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |row: &[String]| {
        row.iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header);
    out.push('\n');
    for r in &cells {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_csv_pivots_by_metric() {
        let text = "# schema: ...\nmethod,x,metric,mean,stderr,n\n\
                    jd2p,1,energy_j,2.5,0.5,3\nosc,1,energy_j,4,0,3\njd2p,2,energy_j,2,0,3\n";
        let out = render(text).unwrap();
        assert!(out.starts_with("energy_j\n"));
        assert!(out.contains("2.5000 ± 0.5000"));
        assert_eq!(out.lines().count(), 4);
    }

    #[test]
    fn plain_tables_align() {
        let out = render("a,bb\n1,2\n333,4\n").unwrap();
        assert_eq!(out, "  a  bb\n  1   2\n333   4\n");
    }
}
