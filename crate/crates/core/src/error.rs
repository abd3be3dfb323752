use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("sequence too long: expansion of {requested} steps exceeds cap {cap}")]
    SequenceTooLong { requested: String, cap: u64 },
    #[error("state {state} out of range for {n} points")]
    InvalidState { state: usize, n: usize },
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("request set is not a set-chasing (0/inf) collection: {0}")]
    NotSetChasing(String),
    #[error("no valid pivot in a set of {0} states")]
    NoPivot(usize),
    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown component: {0}")]
    Unknown(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
