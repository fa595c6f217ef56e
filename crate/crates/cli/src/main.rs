//! `percluster` command-line interface.

mod baseline;
mod evaluate;
mod files;
mod render;
mod stats;
mod training;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use files::usage;

/// Perception-aligned clustering of 2D scatterplots.
///
/// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
/// 3 numeric failure. Errors are printed to stderr as one line starting with
/// "error:". Set PERCLUSTER_WORKERS to fix the size of the worker pool.
/// χ values in reports and search tables are multiplied by 100.
#[derive(Parser, Debug)]
#[command(name = "percluster", version)]
struct Cli {
    #[command(flatten)]
    shared: Shared,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Shared {
    /// JSON configuration file; its schema depends on the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output path; commands with a single textual output write to stdout
    /// when it is omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic annotated dataset (config: SyntheticSpec).
    Synth(stats::SynthArgs),
    /// Stimulus counts and mean agreement per consensus cluster count.
    /// Writes JSON to --out and CSV next to it.
    DatasetStats(stats::StatsArgs),
    /// Train a model (config: TrainConfig). --out is a run directory.
    Train(training::TrainArgs),
    /// Fine-tune a trained model (config: FinetuneConfig). --out is a run
    /// directory.
    Finetune(training::FinetuneArgs),
    /// Cluster every plot of a dataset with a checkpoint; JSON Lines output.
    Predict(evaluate::PredictArgs),
    /// Score predictions against rater groups. Writes a JSON report to --out
    /// and CSV next to it; χ is reported ×100.
    Eval(evaluate::EvalArgs),
    /// Grid search a classical baseline (config: grid JSON); CSV output with
    /// χ ×100.
    BaselineSearch(baseline::SearchArgs),
    /// Score one baseline (config: baseline spec JSON) like `eval`.
    BaselineEval(baseline::BaselineEvalArgs),
    /// Render one plot as an SVG scatterplot.
    Render(render::RenderArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", line.trim_start_matches("error: ").trim());
            return ExitCode::from(1);
        }
    };
    match configure_workers().and_then(|()| dispatch(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {message}");
            ExitCode::from(files::exit_code(&e))
        }
    }
}

fn configure_workers() -> Result<()> {
    let Ok(raw) = std::env::var("PERCLUSTER_WORKERS") else {
        return Ok(());
    };
    let workers: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("PERCLUSTER_WORKERS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| usage(format!("cannot start {workers} workers: {e}")))
}

fn dispatch(cli: Cli) -> Result<()> {
    let shared = cli.shared;
    match cli.command {
        Command::Synth(a) => stats::synth(&shared, a),
        Command::DatasetStats(a) => stats::dataset_stats(&shared, a),
        Command::Train(a) => training::train(&shared, a),
        Command::Finetune(a) => training::finetune(&shared, a),
        Command::Predict(a) => evaluate::predict(&shared, a),
        Command::Eval(a) => evaluate::eval(&shared, a),
        Command::BaselineSearch(a) => baseline::search(&shared, a),
        Command::BaselineEval(a) => baseline::baseline_eval(&shared, a),
        Command::Render(a) => render::render(&shared, a),
    }
}
