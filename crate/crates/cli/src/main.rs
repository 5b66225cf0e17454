//! `xclouds`: analyze, simulate and verify finite exclusion systems described
//! by a config file.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 usage or config error,
//! 3 critical tie (the analysis is still printed).

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "xclouds", version, about = "Stable clouds of finite exclusion processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cloud partition, loads, speeds, widths and stationary laws.
    Analyze {
        config: PathBuf,
        /// Print the canonical JSON document instead of text.
        #[arg(long)]
        json: bool,
        /// Include every iteration of the merging procedure.
        #[arg(long)]
        trace_merges: bool,
    },
    /// Run seeded replicas and summarize speeds and gap occupation.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicas: Option<u64>,
        /// Start of the occupation window; defaults to 10% of the horizon.
        #[arg(long)]
        burn_in: Option<f64>,
        /// Write sampled positions of every replica to this CSV file.
        #[arg(long)]
        out_csv: Option<PathBuf>,
        /// Number of equal sampling intervals for the CSV.
        #[arg(long, default_value_t = 100)]
        snapshots: usize,
    },
    /// Cross-check the analysis against oracles and simulation.
    Verify {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Budget::Default)]
        budget: Budget,
        #[arg(long)]
        seed: Option<u64>,
        /// Self-test: shift the expected speeds so that checks must fail.
        #[arg(long, hide = true)]
        corrupt_expected: bool,
    },
    /// Positions of one replica as CSV on stdout.
    Trace {
        config: PathBuf,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        replica: u64,
        /// Sampling interval.
        #[arg(long, default_value_t = 1.0)]
        every: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Budget {
    Small,
    Default,
    Large,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze { config, json, trace_merges } => commands::analyze(&config, json, trace_merges),
        Command::Simulate { config, horizon, seed, replicas, burn_in, out_csv, snapshots } => {
            let opts = commands::SimulateOptions { horizon, seed, replicas, burn_in, out_csv, snapshots };
            commands::simulate(&config, &opts)
        }
        Command::Verify { config, budget, seed, corrupt_expected } => {
            commands::verify(&config, budget, seed, corrupt_expected)
        }
        Command::Trace { config, horizon, seed, replica, every } => {
            commands::trace(&config, horizon, seed, replica, every)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
