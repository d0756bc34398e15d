//! `deepboost` command line: train, evaluate, predict, synthesize data,
//! inspect filters, render templates.
//!
//! Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 training failure.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

/// Usage-level failures (bad flags, bad config file, unknown generator).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(
    name = "deepboost",
    about = "Layer-wise joint feature boosting and analysis dictionary learning",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a one-vs-all multiclass model
    Train(TrainArgs),
    /// Evaluate a trained model on a dataset
    Evaluate(EvaluateArgs),
    /// Predict the class of one image
    Predict(PredictArgs),
    /// Write a synthetic dataset to disk as an image directory
    Synth(SynthArgs),
    /// Export every layer's filter bank as PNG grids
    InspectFilters(InspectArgs),
    /// Render a layer's selected filters at their strongest activations
    RenderTemplate(RenderArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset: synth-bars | synth-bars-distract | dir:PATH | cifar10:PATH
    #[arg(long)]
    pub dataset: String,
    /// Output directory for the model and all training artifacts
    #[arg(long, default_value = "deepboost-out")]
    pub out: PathBuf,
    /// Flat key = value config file; command-line flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Image side length after resizing
    #[arg(long, default_value_t = 60)]
    pub target_size: usize,
    /// Number of layers L
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    /// Boosting rounds per layer, comma separated; the last value repeats
    #[arg(long, default_value = "50")]
    pub rounds: String,
    /// Regularizer weight
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    /// Initial gradient step size
    #[arg(long, default_value_t = 0.01)]
    pub eta: f64,
    /// Gradient steps per dictionary update
    #[arg(long, default_value_t = 10)]
    pub grad_steps: usize,
    /// Max boost/update alternations per layer
    #[arg(long, default_value_t = 5)]
    pub outer_iters: usize,
    /// Relative objective decrease that counts as converged
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Histogram bins per pyramid block
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Gabor orientations in the first layer
    #[arg(long, default_value_t = 16)]
    pub orientations: usize,
    /// Kernel L2 distance below which one of a filter pair is dropped
    #[arg(long, default_value_t = 0.7)]
    pub compression_threshold: f64,
    /// Keep every composed filter (no compression)
    #[arg(long, default_value_t = false)]
    pub no_compress: bool,
    /// Skip the zero-mean/unit-norm correction after composition
    #[arg(long, default_value_t = false)]
    pub raw_compose: bool,
    /// RNG seed; falls back to $DEEPBOOST_SEED, then 0
    #[arg(long)]
    pub seed: Option<u64>,
    /// Images per class for synthetic datasets
    #[arg(long, default_value_t = 100)]
    pub synth_n: usize,
    /// Cap on worker threads
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Trained model file
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset: synth-bars | synth-bars-distract | dir:PATH | cifar10:PATH
    #[arg(long)]
    pub dataset: String,
    /// Output directory for the report and curves
    #[arg(long, default_value = "deepboost-eval")]
    pub out: PathBuf,
    /// Seed for synthetic datasets (test split); falls back to $DEEPBOOST_SEED
    #[arg(long)]
    pub seed: Option<u64>,
    /// Images per class for synthetic datasets
    #[arg(long, default_value_t = 100)]
    pub synth_n: usize,
    /// Cap on worker threads
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Trained model file
    #[arg(long)]
    pub model: PathBuf,
    /// Image to classify
    #[arg(long)]
    pub image: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Generator name: synth-bars | synth-bars-distract
    #[arg(long, default_value = "synth-bars")]
    pub name: String,
    #[arg(long, default_value_t = 100)]
    pub n_per_class: usize,
    /// RNG seed; falls back to $DEEPBOOST_SEED, then 0
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for the image tree
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// Trained model file
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory for the filter grids
    #[arg(long, default_value = "deepboost-filters")]
    pub out: PathBuf,
    /// Pixel upscaling per kernel cell
    #[arg(long, default_value_t = 12)]
    pub tile_scale: usize,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Trained model file
    #[arg(long)]
    pub model: PathBuf,
    /// Class name whose template to render
    #[arg(long)]
    pub class: String,
    /// Layer to render (1-based)
    #[arg(long, default_value_t = 1)]
    pub layer: usize,
    /// Reference image the activations are taken from
    #[arg(long)]
    pub image: PathBuf,
    /// Output PNG path
    #[arg(long, default_value = "template.png")]
    pub out: PathBuf,
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<deepboost_core::Error>() {
        Some(deepboost_core::Error::ClassTraining { .. })
        | Some(deepboost_core::Error::ZeroWeights)
        | Some(deepboost_core::Error::WeightUnderflow) => 3,
        Some(deepboost_core::Error::InvalidArgument(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            // help/version requests are success, anything else is usage
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Train(args) => {
            let sub = matches.subcommand_matches("train").expect("train matches");
            commands::train(args, sub)
        }
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Predict(args) => commands::predict(args),
        Command::Synth(args) => commands::synth(args),
        Command::InspectFilters(args) => commands::inspect_filters(args),
        Command::RenderTemplate(args) => commands::render_template(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
