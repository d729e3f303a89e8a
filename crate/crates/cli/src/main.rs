//! `hpscan`: verification suites, scaling benchmarks, work/depth predictions
//! and stealing sweeps.
//!
//! Settings come from built-in defaults, then an optional `--config` file of
//! `key = value` lines, then flags. Reports are CSV (bench, predict, sweep)
//! or JSON (verify), written to `--out` or standard output.
//!
//! Exit status: 0 on success, 1 when a property fails or a run errors, 2 on a
//! usage or configuration error.

mod bench;
mod config;
mod predict;
mod report;
mod sweep;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CommonArgs, ExperimentConfig, UsageError};

#[derive(Debug, Parser)]
#[command(name = "hpscan", version, about = "Prefix scans for expensive, imbalanced operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every strategy and circuit against the sequential oracle, the
    /// work/depth formulas, and the stealing exactly-once property.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Exercise every circuit kind, not only --global.
        #[arg(long)]
        all_circuits: bool,
        /// Drop one gate from the evaluated circuits (negative control).
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Strong or weak scaling sweep with static and dynamic rows per point.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        mode: Option<config::Mode>,
    },
    /// Predicted depth, work and speedup bounds over a grid of worker counts.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Static vs stealing makespan of one rank's first phase as lane
    /// segments shrink.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Errors a subcommand reports.
#[derive(Debug)]
pub enum Failure {
    Usage(UsageError),
    /// Properties failed; the report has been written.
    Property(usize),
    Runtime(String),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e)
    }
}

impl From<hpscan::Error> for Failure {
    fn from(e: hpscan::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Verify {
            common,
            all_circuits,
            inject_fault,
        } => {
            let config = ExperimentConfig::resolve(&common, &verify::DEFAULTS)?;
            verify::cmd_verify(&config, all_circuits, inject_fault)
        }
        Command::Bench { common, mode } => {
            let mut config = ExperimentConfig::resolve(&common, &bench::DEFAULTS)?;
            if let Some(mode) = mode {
                config.mode = mode;
            }
            bench::cmd_bench(&config)
        }
        Command::Predict { common } => {
            let config = ExperimentConfig::resolve(&common, &predict::DEFAULTS)?;
            predict::cmd_predict(&config)
        }
        Command::Sweep { common } => {
            let config = ExperimentConfig::resolve(&common, &sweep::DEFAULTS)?;
            sweep::cmd_sweep(&config)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Property(count)) => {
            eprintln!("hpscan: {count} propert{} failed", if count == 1 { "y" } else { "ies" });
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("hpscan: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("hpscan: {e}");
            ExitCode::from(2)
        }
    }
}
