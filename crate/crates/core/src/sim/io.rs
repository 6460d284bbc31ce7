//! Ledger CSV with a leading schema comment, and the matching reader.

use super::RoundLedger;
use crate::error::{Error, Result};

pub const LEDGER_COLUMNS: [(&str, &str); 9] = [
    ("round", "1-based round index k"),
    ("gain", "channel gain h_k"),
    ("candidates", "candidate samples s_k at the start of the round"),
    ("offloaded", "features sent in the offload window"),
    ("prefetched", "next-round features sent during training"),
    ("wasted", "prefetched features of samples that left the candidate set"),
    ("offload_energy", "joules spent in the offload window"),
    ("prefetch_energy", "joules spent prefetching"),
    ("cumulative_energy", "joules spent up to and including this round"),
];

/// `# schema: name (description); ...` followed by a plain header row.
pub fn schema_line(columns: &[(&str, &str)]) -> String {
    let parts: Vec<String> = columns.iter().map(|(n, d)| format!("{n} ({d})")).collect();
    format!("# schema: {}", parts.join("; "))
}

pub fn ledger_to_csv(ledger: &[RoundLedger]) -> Result<String> {
    let mut out = schema_line(&LEDGER_COLUMNS);
    out.push('\n');
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LEDGER_COLUMNS.iter().map(|(n, _)| *n))?;
    for row in ledger {
        w.write_record([
            row.round.to_string(),
            row.gain.to_string(),
            row.candidates.to_string(),
            row.offloaded.to_string(),
            row.prefetched.to_string(),
            row.wasted.to_string(),
            row.offload_energy.to_string(),
            row.prefetch_energy.to_string(),
            row.cumulative_energy.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).expect("ascii"));
    Ok(out)
}

/// Strips `#` comment lines and returns the header and rows.
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

pub fn ledger_from_csv(text: &str) -> Result<Vec<RoundLedger>> {
    let (header, rows) = read_table(text)?;
    let expected: Vec<&str> = LEDGER_COLUMNS.iter().map(|(n, _)| *n).collect();
    if header != expected {
        return Err(Error::Config(format!("unexpected ledger columns {header:?}")));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Config(format!("bad number {s:?} in ledger")))
    };
    let int = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Config(format!("bad count {s:?} in ledger")))
    };
    rows.iter()
        .map(|r| {
            Ok(RoundLedger {
                round: int(&r[0])?,
                gain: num(&r[1])?,
                candidates: int(&r[2])?,
                offloaded: int(&r[3])?,
                prefetched: int(&r[4])?,
                wasted: int(&r[5])?,
                offload_energy: num(&r[6])?,
                prefetch_energy: num(&r[7])?,
                cumulative_energy: num(&r[8])?,
            })
        })
        .collect()
}
