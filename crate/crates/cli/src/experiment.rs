//! Parameter sweeps over repeated seeded runs, written as long-format CSV.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use jd2p::energy::RoundTiming;
use jd2p::sim::{schema_line, BenchmarkKind, SimOutcome, Simulation};
use jd2p::stats::ChannelKind;
use jd2p::{Error, Result};

use crate::config::{ClassifierKind, Config, DeepeningSection, TimingSection};
use crate::data::Prepared;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Clarity threshold against deepening ratio, accuracy and energy.
    TradeoffSweep,
    /// Round count against accuracy of every method.
    DepthSweep,
    /// Prefetch window against energy.
    EnergyVsTau,
    /// Round count against energy.
    RoundsSweep,
    /// Gamma shape against energy.
    ChannelShapeSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::TradeoffSweep => "tradeoff-sweep",
            ExperimentKind::DepthSweep => "depth-sweep",
            ExperimentKind::EnergyVsTau => "energy-vs-tau",
            ExperimentKind::RoundsSweep => "rounds-sweep",
            ExperimentKind::ChannelShapeSweep => "channel-shape-sweep",
        }
    }

    fn sweeps_rounds(self) -> bool {
        matches!(self, ExperimentKind::DepthSweep | ExperimentKind::RoundsSweep)
    }

    /// Whether held-out accuracy is part of the output.
    fn evaluates(self) -> bool {
        matches!(self, ExperimentKind::TradeoffSweep | ExperimentKind::DepthSweep)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Grid of the swept parameter; a kind-specific grid when empty.
    #[serde(default)]
    pub values: Vec<f64>,
    /// Repetitions per grid point.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    /// Methods to run; the simulation section's list when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<BenchmarkKind>>,
}

fn default_seeds() -> usize {
    5
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentSpec {
            kind,
            values: Vec::new(),
            seeds: default_seeds(),
            methods: None,
        }
    }

    /// Name of the swept parameter.
    pub fn x_name(&self, deepening: &DeepeningSection) -> &'static str {
        match self.kind {
            ExperimentKind::TradeoffSweep if deepening.classifier == ClassifierKind::Svm => "p_th",
            ExperimentKind::TradeoffSweep => "z_th",
            ExperimentKind::DepthSweep | ExperimentKind::RoundsSweep => "rounds",
            ExperimentKind::EnergyVsTau => "tau",
            ExperimentKind::ChannelShapeSweep => "shape",
        }
    }

    pub fn max_rounds(&self) -> Option<usize> {
        self.kind
            .sweeps_rounds()
            .then(|| self.values.iter().fold(0.0f64, |a, &b| a.max(b)) as usize)
    }

    pub(crate) fn resolve(&mut self, deepening: &DeepeningSection, timing: &TimingSection) -> Result<()> {
        if self.values.is_empty() {
            self.values = match self.x_name(deepening) {
                "p_th" => vec![0.95, 0.96, 0.97, 0.98, 0.99, 0.995],
                "z_th" => vec![0.01, 0.03, 0.05, 0.07, 0.09],
                "rounds" => (1..=deepening.rounds).map(|k| k as f64).collect(),
                "tau" => (1..=9).map(|i| timing.t0 * i as f64 / 10.0).collect(),
                _ => vec![2.0, 4.0, 8.0, 16.0],
            };
        }
        self.validate(deepening, timing)
    }

    pub fn validate(&self, deepening: &DeepeningSection, timing: &TimingSection) -> Result<()> {
        if self.values.is_empty() || self.seeds == 0 {
            return Err(Error::Config(
                "experiment needs at least one grid value and one seed".into(),
            ));
        }
        if self.methods.as_ref().is_some_and(|m| m.is_empty()) {
            return Err(Error::Config("experiment method list is empty".into()));
        }
        let name = self.x_name(deepening);
        let ok = |v: f64| match name {
            "p_th" => v > 0.0 && v < 1.0,
            "z_th" => (0.0..=1.0).contains(&v),
            "rounds" => v >= 1.0 && v.fract() == 0.0,
            "tau" => v > 0.0 && v < timing.t0,
            _ => v > 1.0,
        };
        match self.values.iter().find(|&&v| !ok(v)) {
            Some(bad) => Err(Error::Config(format!("{} value {bad} out of range", name))),
            None => Ok(()),
        }
    }
}

pub const EXPERIMENT_COLUMNS: [(&str, &str); 6] = [
    ("method", "method name"),
    ("x", "swept parameter value"),
    (
        "metric",
        "energy_j | gain_db | transmitted_features | wasted_features | deepening_ratio | accuracy",
    ),
    ("mean", "mean over seeds and class pairs"),
    ("stderr", "standard error of the mean; 0 for a single run"),
    ("n", "number of runs averaged"),
];

const METRICS: [&str; 6] = [
    "energy_j",
    "gain_db",
    "transmitted_features",
    "wasted_features",
    "deepening_ratio",
    "accuracy",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRow {
    pub method: BenchmarkKind,
    pub x: f64,
    pub metric: &'static str,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// One measurement of one run.
struct Sample {
    method: BenchmarkKind,
    x_index: usize,
    metric: &'static str,
    value: f64,
}

fn outcome_samples(out: &SimOutcome<f64>, osc_energy: f64, x_index: usize, evaluated: bool, samples: &mut Vec<Sample>) {
    let mut push = |metric, value| {
        samples.push(Sample {
            method: out.kind,
            x_index,
            metric,
            value,
        })
    };
    push("energy_j", out.total_energy);
    push("gain_db", 10.0 * (osc_energy / out.total_energy).log10());
    push("transmitted_features", out.transmitted_features as f64);
    push("wasted_features", out.wasted_features as f64);
    push("deepening_ratio", out.deepening_ratio);
    if let (true, Some(acc)) = (evaluated, out.heldout_accuracy) {
        push("accuracy", acc);
    }
}

/// Runs every method of a prepared simulation, OSC first for the gain.
fn run_methods(
    sim: &Simulation<'_, f64>,
    methods: &[BenchmarkKind],
    x_index: usize,
    evaluated: bool,
) -> Result<Vec<Sample>> {
    let osc = sim.run(BenchmarkKind::Osc)?;
    let mut samples = Vec::new();
    for &m in methods {
        let out = if m == BenchmarkKind::Osc {
            osc.clone()
        } else {
            sim.run(m)?
        };
        outcome_samples(&out, osc.total_energy, x_index, evaluated, &mut samples);
    }
    Ok(samples)
}

/// Config of repetition `rep`: both the simulation and training seeds move.
fn repetition(config: &Config, rep: usize) -> Config {
    let mut c = config.clone();
    c.seed = config.seed.wrapping_add(rep as u64);
    c.deepening.seed = config.deepening.seed.wrapping_add(rep as u64);
    c
}

struct Cell {
    data: usize,
    rep: usize,
    /// Grid point for sweeps that retrain; `None` runs the whole grid on one
    /// deepening outcome.
    x_index: Option<usize>,
}

fn run_cell(
    config: &Config,
    spec: &ExperimentSpec,
    data: &[Prepared],
    methods: &[BenchmarkKind],
    cell: &Cell,
) -> Result<Vec<Sample>> {
    let prepared = &data[cell.data];
    let evaluated = spec.kind.evaluates();
    let sim_data = prepared.sim_data(evaluated);
    let mut c = repetition(config, cell.rep);
    match cell.x_index {
        Some(i) => {
            let x = spec.values[i];
            match spec.kind {
                ExperimentKind::TradeoffSweep if c.deepening.classifier == ClassifierKind::Svm => c.deepening.p_th = x,
                ExperimentKind::TradeoffSweep => c.deepening.z_th = x,
                _ => c.deepening.rounds = x as usize,
            }
            let sim = Simulation::prepare(&c.sim_config(prepared.classes)?, sim_data)?;
            run_methods(&sim, methods, i, evaluated)
        }
        None => {
            let base = Simulation::prepare(&c.sim_config(prepared.classes)?, sim_data)?;
            let mut samples = Vec::new();
            for (i, &x) in spec.values.iter().enumerate() {
                let mut sim = base.clone();
                match spec.kind {
                    ExperimentKind::EnergyVsTau => sim.config.timing = RoundTiming::new(c.timing.t0, x)?,
                    _ => sim.config.channel = ChannelKind::Gamma { shape: x },
                }
                samples.extend(run_methods(&sim, methods, i, evaluated)?);
            }
            Ok(samples)
        }
    }
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Executes the grid on a worker pool and averages over seeds and datasets.
/// Rows come out ordered by grid point, then method, then metric.
pub fn run_grid(config: &Config, spec: &ExperimentSpec, data: &[Prepared]) -> Result<Vec<PointRow>> {
    let methods = spec
        .methods
        .clone()
        .unwrap_or_else(|| config.simulation.methods.clone());
    let retrains = matches!(spec.kind, ExperimentKind::TradeoffSweep) || spec.kind.sweeps_rounds();
    let mut cells = Vec::new();
    for d in 0..data.len() {
        for rep in 0..spec.seeds {
            if retrains {
                cells.extend((0..spec.values.len()).map(|i| Cell {
                    data: d,
                    rep,
                    x_index: Some(i),
                }));
            } else {
                cells.push(Cell {
                    data: d,
                    rep,
                    x_index: None,
                });
            }
        }
    }
    let results: Vec<Vec<Sample>> = cells
        .par_iter()
        .map(|cell| run_cell(config, spec, data, &methods, cell))
        .collect::<Result<_>>()?;

    let mut grouped: HashMap<(BenchmarkKind, usize, &'static str), Vec<f64>> = HashMap::new();
    for s in results.into_iter().flatten() {
        grouped
            .entry((s.method, s.x_index, s.metric))
            .or_default()
            .push(s.value);
    }
    let mut rows = Vec::new();
    for (i, &x) in spec.values.iter().enumerate() {
        for &method in &methods {
            for metric in METRICS {
                if let Some(values) = grouped.get(&(method, i, metric)) {
                    let (mean, stderr) = mean_stderr(values);
                    rows.push(PointRow {
                        method,
                        x,
                        metric,
                        mean,
                        stderr,
                        n: values.len(),
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[PointRow], x_name: &str) -> Result<String> {
    let mut columns = EXPERIMENT_COLUMNS;
    let x_desc = format!("swept parameter value ({x_name})");
    columns[1].1 = &x_desc;
    let mut out = schema_line(&columns);
    out.push('\n');
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns.iter().map(|(n, _)| *n))?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.x.to_string(),
            r.metric.to_string(),
            r.mean.to_string(),
            r.stderr.to_string(),
            r.n.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub experiment: &'static str,
    pub x: &'static str,
    pub values: Vec<f64>,
    pub seeds: usize,
    pub datasets: usize,
    pub methods: Vec<&'static str>,
    pub csv: String,
    pub rows: usize,
}

/// Runs the experiment and writes `<kind>.csv` and `summary.json` into `out`.
pub fn run_experiment(
    config: &Config,
    spec: &ExperimentSpec,
    data: &[Prepared],
    out: &Path,
) -> Result<ExperimentSummary> {
    let rows = run_grid(config, spec, data)?;
    let x_name = spec.x_name(&config.deepening);
    let csv_name = format!("{}.csv", spec.kind.name());
    crate::write_file(out.join(&csv_name), &rows_to_csv(&rows, x_name)?)?;
    let methods = spec
        .methods
        .clone()
        .unwrap_or_else(|| config.simulation.methods.clone());
    let summary = ExperimentSummary {
        experiment: spec.kind.name(),
        x: x_name,
        values: spec.values.clone(),
        seeds: spec.seeds,
        datasets: data.len(),
        methods: methods.iter().map(|m| m.name()).collect(),
        csv: csv_name,
        rows: rows.len(),
    };
    crate::write_file(out.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids_follow_the_kind() {
        let d = DeepeningSection::default();
        let t = TimingSection::default();
        let mut spec = ExperimentSpec::new(ExperimentKind::TradeoffSweep);
        spec.resolve(&d, &t).unwrap();
        assert_eq!(spec.values.first(), Some(&0.95));
        assert_eq!(spec.values.last(), Some(&0.995));
        let mut spec = ExperimentSpec::new(ExperimentKind::RoundsSweep);
        spec.resolve(&d, &t).unwrap();
        assert_eq!(spec.values.len(), 10);
        assert_eq!(spec.max_rounds(), Some(10));
    }

    #[test]
    fn out_of_range_values_rejected() {
        let d = DeepeningSection::default();
        let t = TimingSection::default();
        for (kind, bad) in [
            (ExperimentKind::TradeoffSweep, 1.0),
            (ExperimentKind::EnergyVsTau, 1.0),
            (ExperimentKind::ChannelShapeSweep, 1.0),
            (ExperimentKind::DepthSweep, 2.5),
        ] {
            let mut spec = ExperimentSpec::new(kind);
            spec.values = vec![bad];
            assert!(spec.validate(&d, &t).is_err(), "{kind:?}");
        }
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        assert_eq!(mean_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
