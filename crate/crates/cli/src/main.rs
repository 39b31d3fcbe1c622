//! `mortrisk`: synthetic cohorts, cleaning, training, evaluation,
//! explanation and the scoring service from one binary.
//!
//! Exit status is 0 on success, 1 on runtime or I/O failures and 2 on
//! usage and input-validation errors.

mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mortrisk::models::Family;

#[derive(Debug, Parser)]
#[command(name = "mortrisk", version, about = "Interpretable 28-day post-ICU mortality risk models")]
#[command(args_override_self = true)]
struct Cli {
    /// Log filter, e.g. `info` or `mortrisk_service=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic cohort CSV.
    Generate(GenerateArgs),
    /// Drop incomplete records, impute heights and remove 3-sigma outliers.
    Preprocess(PreprocessArgs),
    /// Fit one model family and save a scoring artifact.
    Train(TrainArgs),
    /// Repeated split / balance / tune / test trials for several families.
    Evaluate(EvaluateArgs),
    /// Explain one record, or rank features across models.
    Explain(ExplainArgs),
    /// Serve the HTTP scoring API for a directory of artifacts.
    Serve(ServeArgs),
    /// Run generate, preprocess, train, evaluate and explain end to end.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.076)]
    pub prevalence: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Records that get one value pushed far outside its usual range.
    #[arg(long, default_value_t = 0)]
    pub outliers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Impute heights with the published full-cohort line instead of fitting one.
    #[arg(long)]
    pub paper_coefficients: bool,
    /// Also write the cleaning report as JSON.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub family: Family,
    /// Fixed hyperparameter `name=value`; repeat for several. Skips the search.
    #[arg(long = "hyper", value_name = "NAME=VALUE")]
    pub hyper: Vec<String>,
    /// JSON search space replacing the family default.
    #[arg(long, conflicts_with = "hyper")]
    pub search: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub cv_folds: usize,
    #[arg(long, default_value_t = 0.25)]
    pub test_fraction: f64,
    /// Train on the imbalanced partition.
    #[arg(long)]
    pub no_smote: bool,
    /// Run the cleaning steps first (for raw input).
    #[arg(long)]
    pub clean: bool,
    /// Background rows kept for Shapley explanations.
    #[arg(long)]
    pub background_size: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = Family::ALL)]
    pub families: Vec<Family>,
    #[arg(long, default_value_t = 30)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub cv_folds: usize,
    #[arg(long)]
    pub no_smote: bool,
    /// Summary CSV (family, metric, mean, std).
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Per-trial outcomes as JSON.
    #[arg(long)]
    pub trials_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Model artifact; repeat with `--importance` to compare several.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    /// Cohort CSV supplying the record (`--row`) or the importance sample.
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    /// Zero-based record index in `--cohort`.
    #[arg(long)]
    pub row: Option<usize>,
    /// Feature `name=value`; repeat to build a record by hand, or to
    /// override values of the `--row` record.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub set: Vec<String>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rank features by global importance instead of explaining one record.
    #[arg(long)]
    pub importance: bool,
    /// Ranking length and comparison depth for `--importance`.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    /// Cohort rows averaged for SHAP importance.
    #[arg(long, default_value_t = 50)]
    pub sample: usize,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    Exact,
    Sampled,
    Tree,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    #[arg(long)]
    pub background_size: Option<usize>,
    /// `*` or a single origin allowed by CORS.
    #[arg(long)]
    pub cors_origin: Option<String>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
    Core(mortrisk::Error),
    Service(mortrisk_service::ServiceError),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("I/O error on {}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        use mortrisk::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) | CliError::Service(_) => 1,
            CliError::Core(e) => match e {
                E::Schema(_)
                | E::Parse { .. }
                | E::Validation { .. }
                | E::MissingValue { .. }
                | E::Field { .. }
                | E::Config(_)
                | E::Format(_)
                | E::VersionMismatch { .. }
                | E::TooManyPlayers { .. }
                | E::Json(_) => 2,
                _ => 1,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) | CliError::Runtime(s) => f.write_str(s),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Service(e) => write!(f, "{e}"),
        }
    }
}

impl From<mortrisk::Error> for CliError {
    fn from(e: mortrisk::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<mortrisk_service::ServiceError> for CliError {
    fn from(e: mortrisk_service::ServiceError) -> Self {
        CliError::Service(e)
    }
}

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let args = match config::expand(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::new(&cli.log))
        .with_writer(std::io::stderr)
        .try_init();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Preprocess(a) => commands::preprocess(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Explain(a) => commands::explain(&a),
        Command::Serve(a) => commands::serve(&a),
        Command::Demo(a) => commands::demo(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
