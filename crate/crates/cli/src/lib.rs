//! Command-line front end: argument definitions, the model file and one
//! function per subcommand.

pub mod commands;
pub mod model;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use simplex_metric::corpus::CorpusFormat;
use simplex_metric::eval::DistanceKind;
use simplex_metric::optimizer::OptimizerConfig;
use simplex_metric::Error;

pub use model::ModelFile;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid model: {0}")]
    Model(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), message: e.to_string() }
    }

    /// 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(Error::Config(_)) => 1,
            CliError::Core(Error::Domain(_) | Error::NonFinite(_) | Error::EnumerationTooLarge(_)) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "simplex-metric", version, about = "Learned simplex metrics for nearest-neighbor text classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the metric on a corpus and write a model file.
    Learn(LearnArgs),
    /// Distance between two documents.
    Dist(DistArgs),
    /// Repeated random-split nearest-neighbor evaluation.
    Eval(EvalArgs),
    /// Rank terms by learned weight and by IDF.
    Scores(ScoresArgs),
    /// Time the partition function and its gradient.
    BenchZ(BenchArgs),
    /// Write the vocabulary of a corpus.
    Vocab(VocabArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Corpus root directory (`<label>/<id>.txt`) or JSONL file.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "dir")]
    pub format: CorpusFormat,
    /// Additive smoothing of term frequencies.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Minimum corpus frequency of a vocabulary term.
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    /// Do not append a dummy term to odd-sized vocabularies.
    #[arg(long)]
    pub no_pad: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizerArgs {
    #[arg(long, default_value_t = 1.0)]
    pub initial_step: f64,
    #[arg(long, default_value_t = 0.5)]
    pub backtracking: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
}

impl OptimizerArgs {
    pub fn config(&self, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            initial_step: self.initial_step,
            backtracking: self.backtracking,
            rel_tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// First document (plain text).
    #[arg(long)]
    pub a: PathBuf,
    /// Second document (plain text).
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value = "learned_geodesic")]
    pub kind: DistanceKind,
    /// Corpus for IDF weights; required by `tfidf_cosine`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "dir")]
    pub format: CorpusFormat,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    /// Training set sizes.
    #[arg(long, value_delimiter = ',', default_value = "20,40,80")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Distances to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "learned_geodesic,fisher,tfidf_cosine,tf_l2")]
    pub kinds: Vec<DistanceKind>,
    /// Neighbors voting in the classifier.
    #[arg(long, default_value_t = 1)]
    pub neighbors: usize,
    /// Use this model's metric instead of refitting on every training set.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Report CSV; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the report with its configuration as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoresArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "dir")]
    pub format: CorpusFormat,
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    /// Output directory for `lambda_scores.csv`, `idf_scores.csv` and
    /// `comparison.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Simplex dimensions `n` (odd).
    #[arg(long, value_delimiter = ',', default_value = "1,511,1023,2047")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// CSV output; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Learn(a) => commands::learn(&a),
        Command::Dist(a) => commands::dist(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Scores(a) => commands::scores(&a),
        Command::BenchZ(a) => commands::bench_z(&a),
        Command::Vocab(a) => commands::vocab(&a),
    }
}
