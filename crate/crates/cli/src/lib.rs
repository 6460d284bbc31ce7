//! Configuration, dataset preparation, experiment driving and reporting for
//! the `jd2p` command-line tool.

pub mod commands;
pub mod config;
pub mod data;
pub mod experiment;
pub mod report;

use std::path::Path;

use jd2p::{Error, Result};

pub use config::Config;
pub use experiment::{run_experiment, ExperimentKind, ExperimentSpec};

pub(crate) fn write_file(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Single-line JSON description of a failure, for scripts.
pub fn error_line(err: &Error) -> String {
    serde_json::json!({ "error": err.kind(), "message": err.to_string() }).to_string()
}
