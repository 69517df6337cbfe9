//! `perfektor <subcommand> --config <file> [--seed S] [--replicates N] [--out DIR]`
//!
//! Exit status is 0 when every assertion of the run passes, 1 when one
//! fails and 2 on errors. `PERFEKTOR_THREADS` sets the worker count.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use perfektor_core::harness::config::sha256_hex;
use perfektor_core::harness::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport, RunOptions};
use perfektor_core::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "perfektor", version, about = "Perfect simulation of interacting particle systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured replicate count.
    #[arg(long)]
    replicates: Option<u64>,
    /// Output directory for data files and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the summability conditions of the model.
    Validate(Common),
    /// Decompose finite-range rates into the mixture form.
    Decompose {
        #[command(flatten)]
        common: Common,
        /// Verify that the decomposition reproduces the rates.
        #[arg(long)]
        check: bool,
    },
    /// Draw perfect samples on the configured sites.
    Sample(Common),
    /// Backward sketch lengths and growth diagnostics.
    Sketch(Common),
    /// Stationary trajectories over `[0, horizon]`.
    Trajectory(Common),
    /// Disagreement rates of the coupling over a time grid.
    Couple(Common),
    /// Finitary coding from bit piles.
    Finitary(Common),
    /// Torus long-run oracle.
    Oracle(Common),
    /// Perfect samples against the oracle, with an optional control.
    Compare(Common),
    /// The full acceptance suite.
    Suite(Common),
}

impl Command {
    fn split(self) -> (ExperimentKind, Common, bool) {
        match self {
            Command::Validate(c) => (ExperimentKind::Validate, c, false),
            Command::Decompose { common, check } => (ExperimentKind::Decompose, common, check),
            Command::Sample(c) => (ExperimentKind::Sample, c, false),
            Command::Sketch(c) => (ExperimentKind::Sketch, c, false),
            Command::Trajectory(c) => (ExperimentKind::Trajectory, c, false),
            Command::Couple(c) => (ExperimentKind::Couple, c, false),
            Command::Finitary(c) => (ExperimentKind::Finitary, c, false),
            Command::Oracle(c) => (ExperimentKind::Oracle, c, false),
            Command::Compare(c) => (ExperimentKind::Compare, c, false),
            Command::Suite(c) => (ExperimentKind::Suite, c, false),
        }
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("PERFEKTOR_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("PERFEKTOR_THREADS={value:?} is not a count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn run(kind: ExperimentKind, common: Common, check: bool) -> Result<ExperimentReport, Error> {
    configure_threads()?;
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Error::InvalidConfig(format!("config file {}: {e}", common.config.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(n) = common.replicates {
        config.replicates = n;
    }
    let base = common.config.parent().map(PathBuf::from).unwrap_or_default();
    let loaded = config.prepare(&base, sha256_hex(text.as_bytes()))?;
    run_experiment(&loaded, kind, &RunOptions { check, out: common.out })
}

fn main() -> ExitCode {
    let (kind, common, check) = Cli::parse().command.split();
    match run(kind, common, check) {
        Ok(report) => {
            for a in &report.assertions {
                let verdict = if a.passed { "PASS" } else { "FAIL" };
                println!("{verdict} {}: {}", a.name, a.detail);
            }
            let passed = report.passed();
            println!(
                "{} {} ({} assertions, seed {})",
                kind.name(),
                if passed { "passed" } else { "failed" },
                report.assertions.len(),
                report.seed
            );
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let report = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
