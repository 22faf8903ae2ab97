use thiserror::Error;

#[derive(Debug, Error)]
pub enum QapError {
    /// Malformed or out-of-range arguments (sizes, indices, non-permutations).
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("input matrix is not symmetric: max asymmetry {asymmetry:e} exceeds {tolerance:e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("non-finite value in input")]
    NonFinite,

    #[error("{what} is limited to n <= {max}, got n = {n}")]
    TooLarge { what: &'static str, n: usize, max: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QapError>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(QapError::Argument(msg.into()))
}
