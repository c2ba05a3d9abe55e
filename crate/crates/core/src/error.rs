use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MaggError>;

#[derive(Debug, Error)]
pub enum MaggError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("zero mode is not invertible: mean of the right-hand side is {mean:e}")]
    MeanMode { mean: f64 },

    #[error("phase field left the logarithmic domain: phi = {value} at grid index {index:?}")]
    SeparationViolation { value: f64, index: Option<usize> },

    #[error("{quantity} lost positivity: minimum {min:e}")]
    PositivityLoss { quantity: &'static str, min: f64 },

    #[error("time step {dt:e} exceeds the advective limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("snapshot magic mismatch: found {found:?}")]
    MagicMismatch { found: [u8; 4] },

    #[error("unsupported snapshot format version {0}")]
    VersionMismatch(u32),

    #[error("truncated snapshot: {0}")]
    Truncated(String),

    #[error("malformed snapshot: {0}")]
    MalformedSnapshot(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MaggError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        MaggError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MaggError::Io {
            path: path.into(),
            source,
        }
    }

    /// Configuration and argument problems, as opposed to failures of a running solver.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            MaggError::Validation { .. } | MaggError::Parse(_) | MaggError::InvalidGrid(_)
        )
    }
}
