use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// Gibbs weight is not negligible at the quadrature boundary, or overflows.
    #[error("non-normalizable density: {0}")]
    Divergence(String),

    /// A check left the window where truncated ladder matrices are trustworthy.
    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("threshold {threshold} is within {tol:e} of eigenvalue {eigenvalue}")]
    AmbiguousThreshold {
        threshold: f64,
        eigenvalue: f64,
        tol: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {message}")]
    Ingest { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
