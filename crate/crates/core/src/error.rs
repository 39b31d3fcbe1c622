use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: cannot read `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("validation error at row {row}: `{value}` is not a valid value for `{feature}`")]
    Validation {
        row: usize,
        feature: String,
        value: String,
    },

    #[error("record {record} has a missing value for `{feature}`")]
    MissingValue { record: usize, feature: String },

    #[error("`{field}`: {detail}")]
    Field { field: String, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("intercept calibration failed: {0}")]
    Calibration(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("column mismatch: {0}")]
    ColumnMismatch(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("exact Shapley enumeration supports at most {max} players, got {players}; use sampled mode")]
    TooManyPlayers { players: usize, max: usize },

    #[error("model format error: {0}")]
    Format(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
