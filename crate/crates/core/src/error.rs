//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation was handed an argument outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Vector/matrix sizes do not line up.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A covariance matrix could not be factorized; `name` identifies it.
    #[error("matrix {name} is singular or not positive definite")]
    SingularMatrix { name: &'static str },

    /// An estimator or builder received no data.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Training/ROC requires both labels to be present.
    #[error("dataset contains a single class; both labels are required")]
    SingleClass,

    /// The correlation-estimator denominator went non-positive
    /// (too little data, or the stated noise power is too large).
    #[error("estimator denominator is non-positive ({0:.6e}); need more data or a smaller noise power")]
    NonPositiveDenominator(f64),

    /// A file did not match its documented format.
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
