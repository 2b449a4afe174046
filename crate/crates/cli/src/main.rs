mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Synthetic call/SMS networks, temporal-edge statistics and temporal GNN
/// training and evaluation.
#[derive(Parser, Debug)]
#[command(name = "callnet", version)]
pub struct Cli {
    /// Pipeline configuration file (TOML); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Directory holding events.csv, attributes.csv and derived files.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Seed fanned out to every random stream.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic events and node attributes.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        months: Option<usize>,
        /// Tune persistence and novel-tie rate toward the target indices first.
        #[arg(long)]
        calibrate: bool,
    },
    /// Filter and aggregate the events, then write indices, TEA and TET tables.
    Stats {
        #[command(flatten)]
        common: Common,
        /// Observation window length when the data directory has no generator.toml.
        #[arg(long)]
        months: Option<usize>,
    },
    /// Train a model (or set up the rEdgeBank baseline) into a run directory.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        run_dir: Option<PathBuf>,
        #[arg(long, value_enum)]
        arch: Option<Arch>,
        /// rEdgeBank window in months; tuned on validation when omitted.
        #[arg(long)]
        window: Option<usize>,
        #[command(flatten)]
        hyper: Hyper,
    },
    /// Evaluate run directories on the test months and compare them.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Run directories to evaluate (repeatable).
        #[arg(long = "run-dir", required = true)]
        run_dirs: Vec<PathBuf>,
        /// Output directory for the report tables.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Extra stratified tables (repeatable).
        #[arg(long, value_enum)]
        by: Vec<Strata>,
        #[arg(long)]
        neg_ratio: Option<usize>,
        #[arg(long)]
        khop: Option<usize>,
        #[arg(long)]
        max_seeds: Option<usize>,
    },
}

/// Hyperparameter overrides for `train`.
#[derive(Args, Debug, Clone, Default)]
pub struct Hyper {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub khop: Option<usize>,
    #[arg(long)]
    pub neg_ratio: Option<usize>,
    /// Use a deterministic subset of at most this many seeds per phase.
    #[arg(long)]
    pub max_seeds: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    Gcrn,
    Vgrnn,
    Dysat,
    Roland,
    Redgebank,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strata {
    Gender,
    Age,
    Month,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
