use thiserror::Error;

/// Errors raised by the post-processing routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("operation would produce an empty chain")]
    EmptyOutput,

    #[error("gradients of the log-density are required but neither the chain nor the target supplies them")]
    MissingGradients,

    #[error("design matrix is rank deficient ({rank} of {cols} columns); try a lower polynomial degree or regularisation")]
    RankDeficient { rank: usize, cols: usize },

    #[error("ill-conditioned kernel matrix: {0}")]
    Conditioning(String),

    #[error("exhaustive enumeration of {count} multisets exceeds the cap of {cap}")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (conditioning, degeneracy) as
    /// opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite(_)
                | Error::Degenerate(_)
                | Error::RankDeficient { .. }
                | Error::Conditioning(_)
                | Error::NonFinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
