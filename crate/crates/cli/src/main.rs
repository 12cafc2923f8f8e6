//! Command-line interface: train, estimate, analyze, predict, eval, prune,
//! and alpha-stats over sparse multi-label data.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<xmctree::Error> for CliError {
    fn from(err: xmctree::Error) -> Self {
        let code = match &err {
            xmctree::Error::InvalidParam(_) => 1,
            xmctree::Error::Numeric(_) => 3,
            _ => 2,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "xmctree",
    version,
    about = "Tree-based linear classifiers for extreme multi-label problems on sparse data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a label tree, estimate its size, train, and save the model
    Train(TrainArgs),
    /// Estimate the tree model size without training any classifier
    Estimate(EstimateArgs),
    /// Evaluate the balanced-tree size formulas, thresholds, and costs
    Analyze(AnalyzeArgs),
    /// Write ranked label predictions for a test set
    Predict(PredictArgs),
    /// Report precision@k of a model on a test set
    Eval(EvalArgs),
    /// Drop weights with magnitude at most a threshold from a saved model
    Prune(PruneArgs),
    /// Per-node and per-depth feature-reduction statistics of a tree
    #[command(name = "alpha-stats")]
    AlphaStats(AlphaStatsArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (resolved configuration is written here too)
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses all cores
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output format: `json` mirrors every CSV as JSON
    #[arg(long, value_enum)]
    pub emit: Option<EmitKind>,
    /// Base seed; clustering and training derive per-task streams from it
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitKind {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Dataset in multi-label LIBSVM text format
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Declared feature count (overrides the sidecar and inference)
    #[arg(long)]
    pub n_features: Option<u32>,
    /// Declared label count (overrides the sidecar and inference)
    #[arg(long)]
    pub n_labels: Option<u32>,
    /// Treat on-disk indices as 0-based instead of 1-based
    #[arg(long)]
    pub zero_based: bool,
}

#[derive(Args, Debug, Clone)]
pub struct TreeArgs {
    /// Clusters per node
    #[arg(long)]
    pub k: Option<u32>,
    /// Maximum tree depth
    #[arg(long = "dmax")]
    pub d_max: Option<u32>,
    /// `fixed-k` keeps K as given; `varied-k` sets K = ceil(L^(1/dmax))
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    FixedK,
    VariedK,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub tree: TreeArgs,
    /// Train a flat one-vs-rest model instead of a tree
    #[arg(long)]
    pub ovr: bool,
    /// Loss: squared_hinge or logistic
    #[arg(long)]
    pub loss: Option<String>,
    /// L2 regularization weight
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Solver stopping tolerance
    #[arg(long)]
    pub eps: Option<f64>,
    /// Solver epoch cap per binary problem
    #[arg(long)]
    pub max_iter: Option<u32>,
    /// Model output path (default `<out-dir>/model.bin`)
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Also report the size ratio without the 1.5 index-storage factor
    #[arg(long)]
    pub raw_nnz_ratio: bool,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub tree: TreeArgs,
    /// Also report the size ratio without the 1.5 index-storage factor
    #[arg(long)]
    pub raw_nnz_ratio: bool,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Label count of the idealized balanced tree
    #[arg(long)]
    pub l: Option<u64>,
    /// Branching factor of the idealized balanced tree
    #[arg(long)]
    pub k: Option<u64>,
    /// Feature-reduction ratios to sweep (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// First depth of the sweep (default 2)
    #[arg(long)]
    pub d_from: Option<u32>,
    /// Last depth of the sweep (default: the maximum feasible depth)
    #[arg(long)]
    pub d_to: Option<u32>,
    /// Cost model: instance count
    #[arg(long)]
    pub ell: Option<f64>,
    /// Cost model: average non-zeros per instance
    #[arg(long)]
    pub nbar: Option<f64>,
    /// Cost model: labels-per-instance constant
    #[arg(long)]
    pub c: Option<f64>,
    /// Cost model: k-means iterations
    #[arg(long)]
    pub kmeans_iters: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Saved model file
    #[arg(long)]
    pub model: PathBuf,
    /// Beam width for tree models
    #[arg(long)]
    pub beam: Option<usize>,
    /// Ranked labels to write per instance
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Predictions output path (default `<out-dir>/predictions.txt`)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Saved model file
    #[arg(long)]
    pub model: PathBuf,
    /// Beam width for tree models
    #[arg(long)]
    pub beam: Option<usize>,
    /// Precision cutoffs (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
pub struct PruneArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Saved model file
    #[arg(long)]
    pub model: PathBuf,
    /// Pruning threshold: weights with |w| <= tau are dropped
    #[arg(long)]
    pub tau: Option<f64>,
    /// Pruned model output path (default `<out-dir>/model_pruned.bin`)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AlphaStatsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub tree: TreeArgs,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => commands::train(args),
        Command::Estimate(args) => commands::estimate(args),
        Command::Analyze(args) => commands::analyze(args),
        Command::Predict(args) => commands::predict(args),
        Command::Eval(args) => commands::eval(args),
        Command::Prune(args) => commands::prune(args),
        Command::AlphaStats(args) => commands::alpha_stats(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
