use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} points, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid parameter `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("infeasible input state: {0}")]
    InfeasibleState(String),

    #[error("singular model: {0}")]
    Singular(String),

    #[error("divergence in field `{field}` at step {step}")]
    Divergence { field: &'static str, step: u64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
