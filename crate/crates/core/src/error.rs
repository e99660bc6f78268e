use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("row {line}: {reason}")]
    Row { line: usize, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid model specification: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),

    #[error("probability of the chosen level underflowed at observation {observation}")]
    ZeroProbability { observation: usize },

    #[error("non-finite objective: {0}")]
    NonFinite(String),

    #[error("covariance matrix unavailable: {0}")]
    Covariance(String),

    #[error("likelihood ratio statistic {statistic:.6} is negative: {context}")]
    NegativeStatistic { statistic: f64, context: String },

    #[error("no observations")]
    Empty,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
