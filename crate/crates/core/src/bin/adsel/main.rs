//! `adsel` command-line interface.
//!
//! Exit status: 0 on success, 2 for usage or input validation problems, 1 for
//! failures during the run itself.

mod commands;
mod config;
mod inputs;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use adsel::harness::Weight;
use clap::{Args, Parser, Subcommand};

use config::{ProtocolFlags, SolverFlags};
use inputs::DataArgs;

#[derive(Debug, Parser)]
#[command(name = "adsel", version, about = "Incomplete multi-label feature selection with dual self-expression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the selector and write the feature ranking, model and objective trace.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverFlags,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick the top features, from a fresh fit or an existing ranking.json.
    Select(SelectArgs),
    /// Run the missing-label protocol and write summary and plot tables.
    Experiment {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        protocol: ProtocolFlags,
        /// Grid-search the weights first (globally, or per ratio when the
        /// config sets tune_per_ratio).
        #[arg(long)]
        tune: bool,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Vary one weight over its grid with the others fixed.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        protocol: ProtocolFlags,
        /// lambda, alpha, beta, mu or delta.
        #[arg(long)]
        parameter: Weight,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Friedman / Iman-Davenport test on methods x settings score tables.
    Friedman {
        /// Score table CSV: one row per method, one column per setting. An
        /// optional header row and leading name column are detected.
        #[arg(long = "table", required = true)]
        tables: Vec<PathBuf>,
        /// Critical value of F_F to compare against.
        #[arg(long)]
        critical: f64,
        /// Larger scores rank better (e.g. average precision).
        #[arg(long)]
        higher_is_better: bool,
    },
    /// Remove a share of each label column and write the masked files.
    SimulateMissing {
        /// Label matrix CSV, one row per sample.
        #[arg(long)]
        labels: PathBuf,
        /// Share of each label column to remove, in [0, 1).
        #[arg(long)]
        ratio: f64,
        /// Seed of the removal draw.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Labels file holds raw ratings; binarise at this threshold.
        #[arg(long)]
        ratings_threshold: Option<f64>,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false, args = ["ranking", "features"])]
struct SelectArgs {
    /// ranking.json from an earlier fit.
    #[arg(long)]
    ranking: Option<PathBuf>,
    /// Feature matrix CSV to fit on (requires --labels).
    #[arg(long, requires = "labels")]
    features: Option<PathBuf>,
    /// Label matrix CSV, one row per sample.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Observation mask CSV (1 observed, 0 missing).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Row layout of the features file.
    #[arg(long, value_enum, default_value = "samples")]
    layout: inputs::Layout,
    /// Labels file holds raw ratings; binarise at the configured threshold.
    #[arg(long)]
    ratings: bool,
    #[command(flatten)]
    solver: SolverFlags,
    /// Fraction of features to keep (default from config, 0.10).
    #[arg(long, conflicts_with = "count")]
    budget: Option<f64>,
    /// Exact number of features to keep.
    #[arg(long)]
    count: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

/// Applies `ADSEL_THREADS` to the global worker pool.
fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("ADSEL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("ADSEL_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Fit { data, solver, out } => commands::fit(&data, &solver, &out),
        Command::Select(args) => commands::select(&args),
        Command::Experiment {
            data,
            solver,
            protocol,
            tune,
            out,
        } => commands::experiment(&data, &solver, &protocol, tune, &out),
        Command::Sweep {
            data,
            solver,
            protocol,
            parameter,
            out,
        } => commands::sweep(&data, &solver, &protocol, parameter, &out),
        Command::Friedman {
            tables,
            critical,
            higher_is_better,
        } => commands::friedman(&tables, critical, higher_is_better),
        Command::SimulateMissing {
            labels,
            ratio,
            seed,
            ratings_threshold,
            out,
        } => commands::simulate_missing(&labels, ratio, seed, ratings_threshold, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
