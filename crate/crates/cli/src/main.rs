use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jd2p_cli::commands::{self, load_config, Overrides};
use jd2p_cli::{error_line, report};

/// Feature-by-feature edge offloading simulator.
#[derive(Parser)]
#[command(name = "jd2p", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Fit the PCA embedding and write it with its variance profile.
    Embed(RunArgs),
    /// Run data deepening and write the per-round log and the cascade.
    Deepen(RunArgs),
    /// Simulate every configured method and write energy ledgers.
    Simulate(RunArgs),
    /// Run the config's [experiment] sweep.
    Experiment(RunArgs),
    /// Print CSV outputs (a file or a directory) as tables.
    Report {
        path: PathBuf,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file.
    #[arg(short, long)]
    config: PathBuf,
    /// Replaces the config's top-level seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; replaces the config's `output`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Train on every sample not held out, instead of the configured subset.
    #[arg(long)]
    full: bool,
}

fn run(verb: Verb) -> jd2p::Result<String> {
    let (args, f): (RunArgs, fn(&jd2p_cli::Config) -> jd2p::Result<serde_json::Value>) = match verb {
        Verb::Embed(a) => (a, commands::embed),
        Verb::Deepen(a) => (a, commands::deepen),
        Verb::Simulate(a) => (a, commands::simulate),
        Verb::Experiment(a) => (a, commands::experiment),
        Verb::Report { path, out } => {
            let text = report::report(&path)?;
            if let Some(out) = out {
                std::fs::write(&out, &text).map_err(|e| jd2p::Error::io(&out, e))?;
            }
            return Ok(text);
        }
    };
    let overrides = Overrides {
        seed: args.seed,
        out: args.out,
        full: args.full,
    };
    let config = load_config(&args.config, &overrides)?;
    Ok(serde_json::to_string_pretty(&f(&config)?)?)
}

fn main() -> ExitCode {
    match run(Cli::parse().verb) {
        Ok(text) => {
            // a closed pipe (`jd2p report out | head`) is not an error
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", error_line(&err));
            ExitCode::FAILURE
        }
    }
}
