//! `mapreg`: scan-to-map registration, benchmarking, and map-editing CLI.
//!
//! Exit codes: 0 success, 2 missing or invalid input, 3 I/O failure,
//! 4 algorithmic failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CommandError;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "mapreg", version, about = "Scan-to-map registration toolkit")]
struct Cli {
    /// JSON run configuration; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for every randomized stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads (default: all cores). Outputs are identical
    /// for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble a registration map from posed keyframes.
    BuildMap(commands::BuildMapArgs),
    /// Register one scan against a map and write the result JSON.
    Register(commands::RegisterArgs),
    /// Evaluate every scene bundle under a directory; write CSV/JSON reports
    /// and a recall curve.
    Benchmark(commands::BenchmarkArgs),
    /// Remove or insert object clusters in a map, with an edit manifest.
    PerturbMap(commands::PerturbMapArgs),
    /// Write PCA-colorized PLY files for a map and its scans.
    Colorize(commands::ColorizeArgs),
    /// Recompute a recall curve from cached benchmark pose pairs.
    RecallCurve(commands::RecallCurveArgs),
    /// Generate synthetic scene bundles for benchmarking.
    SynthWorld(commands::SynthWorldArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: could not configure {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match RunConfig::load(cli.config.as_deref(), cli.seed) {
        Ok(cfg) => cfg,
        Err(err) => return fail(&err),
    };
    let result = match &cli.command {
        Command::BuildMap(args) => commands::build_map(&cfg, args),
        Command::Register(args) => commands::register(&cfg, args),
        Command::Benchmark(args) => commands::benchmark(&cfg, args),
        Command::PerturbMap(args) => commands::perturb_map(&cfg, args),
        Command::Colorize(args) => commands::colorize(&cfg, args),
        Command::RecallCurve(args) => commands::recall_curve(&cfg, args),
        Command::SynthWorld(args) => commands::synth_world(&cfg, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => fail(&err),
    }
}

fn fail(err: &CommandError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code())
}
