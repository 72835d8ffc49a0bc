//! Thin CLI over the library: scenario-driven analytics and simulation
//! commands emitting CSV files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use edgeledger::cohort::SynthParams;
use edgeledger::harness;
use edgeledger::scenario::resolve_scenario;

#[derive(Parser)]
#[command(
    name = "edgeledger",
    version,
    about = "Biosignal change detection, priority-queue analytics, and ledger channel optimization",
    after_help = "Scenario arguments accept a file path or a bundled name (paper_default, fig4)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-window features from a signal CSV.
    Features {
        /// Signal CSV (patient,channel,session,sample_index,value).
        signals: PathBuf,
        /// Samples per window.
        #[arg(long, default_value_t = 1920)]
        window: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the monitoring pipeline: deltas, change indicators, statuses.
    Monitor {
        signals: PathBuf,
        /// Classification threshold (percent).
        #[arg(long, default_value_t = 30.0)]
        zeta: f64,
        #[arg(long, default_value_t = 1920)]
        window: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Closed-form sojourn table across the scenario's service rates.
    Queue {
        /// Scenario file or bundled name.
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Greedy configuration search with the exhaustive oracle comparison.
    Optimize {
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Per-channel configuration traces.
    Channels {
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Pipeline simulation under both disciplines plus the queue oracle.
    Simulate {
        scenario: String,
        /// Override the scenario's simulation seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate a synthetic cohort CSV.
    Synth {
        #[arg(long, default_value_t = 30)]
        patients: usize,
        #[arg(long, default_value_t = 14)]
        channels: usize,
        #[arg(long, default_value_t = 1920)]
        window: usize,
        /// Channels per patient given an injected change.
        #[arg(long, default_value_t = 0)]
        injected: usize,
        /// Mean shift for injected channels (microvolts).
        #[arg(long, default_value_t = 80.0)]
        offset: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 40.0)]
        mean: f64,
        #[arg(long, default_value_t = 5.0)]
        sd: f64,
        #[arg(long, default_value = "out/signals.csv")]
        out: PathBuf,
    },
}

fn run(command: Command) -> edgeledger::Result<String> {
    match command {
        Command::Features { signals, window, out } => harness::run_features(&signals, window, &out),
        Command::Monitor {
            signals,
            zeta,
            window,
            out,
        } => harness::run_monitor(&signals, zeta, window, &out),
        Command::Queue { scenario, out } => {
            let s = resolve_scenario(&scenario)?;
            harness::run_queue(&s, &out)
        }
        Command::Optimize { scenario, out } => {
            let s = resolve_scenario(&scenario)?;
            harness::run_optimize(&s, &out)
        }
        Command::Channels { scenario, out } => {
            let s = resolve_scenario(&scenario)?;
            harness::run_channels(&s, &out)
        }
        Command::Simulate { scenario, seed, out } => {
            let s = resolve_scenario(&scenario)?;
            harness::run_simulate(&s, seed, &out)
        }
        Command::Synth {
            patients,
            channels,
            window,
            injected,
            offset,
            seed,
            mean,
            sd,
            out,
        } => harness::run_synth(
            &SynthParams {
                patients,
                channels,
                window_len: window,
                injected_channels: injected,
                offset,
                seed,
                base_mean: mean,
                base_sd: sd,
            },
            &out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error kind={} msg=\"{e}\"", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
