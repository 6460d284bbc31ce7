//! The `embed`, `deepen`, `simulate` and `experiment` verbs. Each writes its
//! files plus `config.resolved.toml` into the output directory and returns
//! the summary it also writes as `summary.json`.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use jd2p::deepening::{run_deepening, DeepeningData};
use jd2p::learners::save_model;
use jd2p::sim::{ledger_to_csv, schema_line, BenchmarkKind, SimOutcome, Simulation, TxEvent};
use jd2p::{Error, Result};

use crate::config::Config;
use crate::data::{prepare, prepare_all};
use crate::experiment::run_experiment;
use crate::write_file;

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub full: bool,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<Config> {
    let mut config = Config::load(path)?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(out) = &overrides.out {
        config.output = out.clone();
    }
    config.dataset.full |= overrides.full;
    config.resolve()
}

/// Creates the output directory and echoes the resolved config into it.
fn start(config: &Config) -> Result<&Path> {
    let out = config.output.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_file(out.join("config.resolved.toml"), &config.to_toml()?)?;
    Ok(out)
}

fn finish(out: &Path, summary: Value) -> Result<Value> {
    write_file(out.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

fn single_dataset(config: &Config) -> Result<()> {
    if config.dataset.class_pairs.is_some() {
        return Err(Error::Config(
            "class_pairs is only used by experiments; set class_subset instead".into(),
        ));
    }
    Ok(())
}

fn csv_table<R: IntoIterator<Item = Vec<String>>>(columns: &[(&str, &str)], rows: R) -> Result<String> {
    let mut out = schema_line(columns);
    out.push('\n');
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns.iter().map(|(n, _)| *n))?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

pub fn embed(config: &Config) -> Result<Value> {
    single_dataset(config)?;
    let out = start(config)?;
    let data = prepare(config)?;
    save_model(&data.embedding, out.join("embedding.json"))?;
    let captured = data.embedding.captured_variance();
    let eigenvalues = data.embedding.eigenvalues();
    let rows = eigenvalues
        .iter()
        .zip(&captured)
        .enumerate()
        .map(|(i, (ev, c))| vec![(i + 1).to_string(), ev.to_string(), c.to_string()]);
    let columns = [
        ("feature", "1-based principal component index"),
        ("eigenvalue", "variance along the component"),
        ("captured", "cumulative variance of features 1..=feature"),
    ];
    write_file(out.join("variance.csv"), &csv_table(&columns, rows)?)?;
    finish(
        out,
        json!({
            "raw_dim": data.embedding.raw_dim(),
            "features": data.embedding.feature_dim(),
            "train": data.train_y.len(),
            "test": data.test_y.len(),
            "pilot": data.pilot_y.len(),
            "captured_variance": captured.last(),
        }),
    )
}

pub fn deepen(config: &Config) -> Result<Value> {
    single_dataset(config)?;
    let out = start(config)?;
    let data = prepare(config)?;
    let params = config.deepening_params(data.classes);
    let input = DeepeningData {
        features: data.train_x.view(),
        labels: &data.train_y,
        embedding: Some(&data.embedding),
        test: Some((data.test_x.view(), &data.test_y)),
    };
    let outcome = run_deepening(&input, &params)?;
    save_model(&outcome.classifier, out.join("classifier.json"))?;

    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let columns = [
        ("round", "1-based round index k"),
        ("candidates", "candidate samples at the start of the round"),
        ("threshold", "clarity threshold of the round"),
        ("cleared", "samples that left the candidate set this round"),
        (
            "train_accuracy",
            "accuracy of the depth-k classifier on its training samples",
        ),
        ("heldout_accuracy", "held-out accuracy of the cascade up to depth k"),
        (
            "heldout_depth_accuracy",
            "held-out accuracy of the depth-k classifier alone",
        ),
    ];
    let rows = outcome.logs.iter().map(|l| {
        vec![
            l.round.to_string(),
            l.candidates.to_string(),
            l.threshold.to_string(),
            l.cleared.to_string(),
            l.train_accuracy.to_string(),
            opt(l.heldout_accuracy),
            opt(l.heldout_depth_accuracy),
        ]
    });
    write_file(out.join("rounds.csv"), &csv_table(&columns, rows)?)?;

    let columns = [
        ("round", "1-based round index k"),
        ("epoch", "1-based epoch within the round"),
        ("loss", "mean training cross-entropy after the epoch"),
    ];
    let rows = outcome.logs.iter().flat_map(|l| {
        l.epoch_losses
            .iter()
            .enumerate()
            .map(move |(e, loss)| vec![l.round.to_string(), (e + 1).to_string(), loss.to_string()])
    });
    write_file(out.join("losses.csv"), &csv_table(&columns, rows)?)?;

    let cascade = outcome.classifier.infer_batch(data.test_x.view())?;
    let correct = cascade.iter().zip(&data.test_y).filter(|((p, _), y)| p == *y).count();
    let mean_depth = cascade.iter().map(|(_, d)| *d as f64).sum::<f64>() / cascade.len().max(1) as f64;
    finish(
        out,
        json!({
            "rounds": outcome.rounds,
            "candidate_sizes": outcome.candidate_sizes(),
            "deepening_ratio": outcome.deepening_ratio(),
            "train_accuracy": outcome.train_accuracy(&data.train_y),
            "heldout_accuracy": correct as f64 / data.test_y.len().max(1) as f64,
            "heldout_mean_depth": mean_depth,
            "termination": outcome.termination,
        }),
    )
}

#[derive(Serialize)]
struct MethodSummary {
    method: &'static str,
    total_energy_j: f64,
    gain_db_vs_osc: f64,
    transmitted_features: usize,
    wasted_features: usize,
    deepening_ratio: f64,
    heldout_accuracy: Option<f64>,
}

fn events_csv(events: &[TxEvent]) -> Result<String> {
    let columns = [
        ("round", "1-based round index"),
        ("phase", "offload | prefetch"),
        ("feature", "1-based feature index; empty for mixed batches"),
        ("features", "features in the batch"),
        ("gain", "channel gain"),
        ("duration", "transmission window in seconds"),
        ("energy", "joules spent on the batch"),
    ];
    let rows = events.iter().map(|e| {
        vec![
            e.round.to_string(),
            match e.phase {
                jd2p::sim::TxPhase::Offload => "offload".to_string(),
                jd2p::sim::TxPhase::Prefetch => "prefetch".to_string(),
            },
            e.feature.map_or(String::new(), |f| f.to_string()),
            e.features.to_string(),
            e.gain.to_string(),
            e.duration.to_string(),
            e.energy.to_string(),
        ]
    });
    csv_table(&columns, rows)
}

pub fn simulate(config: &Config) -> Result<Value> {
    single_dataset(config)?;
    let out = start(config)?;
    let data = prepare(config)?;
    let sim = Simulation::prepare(&config.sim_config(data.classes)?, data.sim_data(true))?;
    let osc = sim.run(BenchmarkKind::Osc)?;
    let mut methods = Vec::new();
    for &kind in &config.simulation.methods {
        let result: SimOutcome<f64> = if kind == BenchmarkKind::Osc {
            osc.clone()
        } else {
            sim.run(kind)?
        };
        write_file(
            out.join(format!("ledger-{}.csv", kind.name())),
            &ledger_to_csv(&result.ledger)?,
        )?;
        write_file(
            out.join(format!("events-{}.csv", kind.name())),
            &events_csv(&result.events)?,
        )?;
        methods.push(MethodSummary {
            method: kind.name(),
            total_energy_j: result.total_energy,
            gain_db_vs_osc: 10.0 * (osc.total_energy / result.total_energy).log10(),
            transmitted_features: result.transmitted_features,
            wasted_features: result.wasted_features,
            deepening_ratio: result.deepening_ratio,
            heldout_accuracy: result.heldout_accuracy,
        });
    }
    finish(
        out,
        json!({
            "candidate_sizes": sim.outcome.candidate_sizes(),
            "rho": sim.rho,
            "termination": sim.outcome.termination,
            "methods": methods,
        }),
    )
}

pub fn experiment(config: &Config) -> Result<Value> {
    let spec = config
        .experiment
        .as_ref()
        .ok_or_else(|| Error::Config("no [experiment] section in the config".into()))?;
    let out = start(config)?;
    let data = prepare_all(config)?;
    let summary = run_experiment(config, spec, &data, out)?;
    Ok(serde_json::to_value(summary)?)
}
