//! Command-line front end for `softforest`: training, evaluation, gradient
//! checking, topology export and parameter accounting.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{parse_config, ConfigError, DatasetKind, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "softforest",
    version,
    about = "Soft, budding and distributed decision trees and deep forests"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a forest and write the model and a metrics CSV.
    Train(TrainArgs),
    /// Evaluate a saved model on the test split and write a confusion CSV.
    Eval(EvalArgs),
    /// Compare analytic gradients with central differences on random trees.
    Gradcheck(GradcheckArgs),
    /// Write one tree of a saved model as a DOT graph.
    ExportDot(ExportDotArgs),
    /// Count trainable parameters of a saved model or a configuration.
    CountParams(CountParamsArgs),
}

/// Configuration file and the flags that override it.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// `key = value` configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// MNIST directory (defaults to $SOFTFOREST_DATA_DIR).
    #[arg(long, value_name = "PATH")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Train on this many samples after a seeded shuffle (0 = all).
    #[arg(long, value_name = "N")]
    pub subset: Option<usize>,
    #[arg(long, value_name = "N")]
    pub layers: Option<usize>,
    #[arg(long, value_name = "N")]
    pub trees: Option<usize>,
    #[arg(long, value_name = "N")]
    pub depth: Option<usize>,
    /// soft, budding or distributed.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long, value_name = "N")]
    pub filters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Model output path.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Metrics CSV output path.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Configuration naming the dataset (MNIST by default).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Confusion CSV output path.
    #[arg(long, value_name = "PATH", default_value = "confusion.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Perturbs the analytic gradient so the check must fail.
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
}

#[derive(Debug, Args)]
pub struct ExportDotArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    #[arg(long, default_value_t = 0)]
    pub tree: usize,
    /// Nodes with leafness at or above this become leaves.
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,
    /// DOT output path (stdout when absent).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CountParamsArgs {
    /// Count a saved model instead of a configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "config")]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
    /// Compare the total against a reference count.
    #[arg(long, value_name = "N")]
    pub reference: Option<u64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("bad config: {0}")]
    Config(#[from] ConfigError),
    #[error("bad arguments: {0}")]
    Usage(String),
    #[error("missing data: {0}")]
    Data(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("bad model file: {0}")]
    Model(String),
    #[error("{0}")]
    Core(#[from] softforest::Error),
    #[error("gradient check failed: max relative error {0:e} is not below 1e-6")]
    GradCheckFailed(f64),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::GradCheckFailed(_) | CliError::Core(_) => 1,
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Io(_) => 4,
            CliError::Model(_) => 5,
        }
    }

    /// The diagnostic on a single line.
    pub fn one_line(&self) -> String {
        self.to_string().replace(['\n', '\r'], " ")
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Gradcheck(a) => commands::gradcheck(&a),
        Command::ExportDot(a) => commands::export_dot(&a),
        Command::CountParams(a) => commands::count_params(&a),
    }
}
