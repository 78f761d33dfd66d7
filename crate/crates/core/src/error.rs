use thiserror::Error;

#[derive(Debug, Error)]
pub enum QimError {
    #[error("dimensions must be positive (n = {n}, m = {m})")]
    ZeroDimension { n: usize, m: usize },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A QIM1 denominator fell below the guard threshold.
    #[error("measurement {index} has y = {value:e}, below the guard {guard:e}")]
    SingularDenominator { index: usize, value: f64, guard: f64 },

    #[error("the signal has zero norm")]
    ZeroSignal,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite iterate at iteration {iter}")]
    NonFinite { iter: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, QimError>;
