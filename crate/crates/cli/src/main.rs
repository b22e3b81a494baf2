//! Command-line runner for hierarchical k-median experiments.

mod commands;
mod config;
mod data;
mod fail;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, Settings};
use fail::{config_err, CliResult};

#[derive(Parser)]
#[command(
    name = "hkmedian",
    version,
    about = "Hierarchical k-median clustering and its stability under deletions"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Build hierarchies and write every level with its centers and costs.
    Cluster(RunArgs),
    /// Average partition distance after deleting points, per grid cell.
    Sensitivity(RunArgs),
    /// Euclidean k-median cost against k.
    CostCurve(RunArgs),
    /// Per-cluster MaxIntra and MinInter of a DBSCAN or known partition.
    Clusterability(RunArgs),
    /// Write a synthetic dataset as CSV with a JSON sidecar.
    Gen(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON settings, or any output of this tool; flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(flatten)]
    settings: Settings,
}

fn run(cli: Cli) -> CliResult<()> {
    let (command, args) = match cli.command {
        Sub::Cluster(a) => (Command::Cluster, a),
        Sub::Sensitivity(a) => (Command::Sensitivity, a),
        Sub::CostCurve(a) => (Command::CostCurve, a),
        Sub::Clusterability(a) => (Command::Clusterability, a),
        Sub::Gen(a) => (Command::Gen, a),
    };
    let base = match &args.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let settings = args.settings.over(base).resolve(command)?;
    if let Some(workers) = settings.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| config_err(format!("cannot start {workers} workers: {e}")))?;
    }
    let input = data::load(&settings)?;
    match command {
        Command::Cluster => commands::cluster(&settings, &input),
        Command::Sensitivity => commands::sensitivity(&settings, &input),
        Command::CostCurve => commands::cost_curve(&settings, &input),
        Command::Clusterability => commands::clusterability(&settings, &input),
        Command::Gen => commands::gen(&settings, &input),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hkmedian: {e}");
            e.exit_code()
        }
    }
}
