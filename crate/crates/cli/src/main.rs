//! `ldp-lab` — scenario-driven rare-event experiments.
//!
//! Exit codes: 0 success, 2 the run completed but the measured decay rate
//! disagreed with the predicted rate, 1 operational error.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod registry;
mod runner;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ldp-lab", version, about = "Rare-event decay rates vs numerical rate functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config end to end and write estimate/summary/plot files.
    Run {
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's samples-per-scale.
        #[arg(long)]
        samples: Option<u64>,
        /// Output directory (default: the config's directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suppress the timestamp header line in text outputs.
        #[arg(long)]
        no_timestamp: bool,
    },
    /// List registered drivers, observables, events, rates, and oracles.
    List,
    /// Parse and validate a scenario config without running it.
    Validate { config: PathBuf },
}

fn init_workers() {
    if let Ok(v) = std::env::var("LDP_LAB_WORKERS") {
        if let Ok(k) = v.parse::<usize>() {
            if k >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    init_workers();
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            print!("{}", registry::listing());
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match scenario::load(&config) {
            Ok(c) => {
                println!("{}: ok (scenario {:?})", config.display(), c.name);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Run { config, seed, samples, out, no_timestamp } => {
            let parsed = match scenario::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            let out_dir = out.unwrap_or_else(|| {
                config.parent().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
            });
            match runner::run(&parsed, &out_dir, samples, seed, no_timestamp) {
                Ok(outcome) => {
                    for f in &outcome.files {
                        println!("wrote {}", f.display());
                    }
                    println!(
                        "scenario {:?}: slope {:.6} +- {:.6} vs rate {:.6} -> {}",
                        outcome.summary.scenario,
                        outcome.summary.slope,
                        outcome.summary.slope_ci,
                        outcome.summary.rate_predicted,
                        if outcome.pass { "PASS" } else { "FAIL" }
                    );
                    if outcome.pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
