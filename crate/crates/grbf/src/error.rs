use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("operation needs a bounded domain")]
    Unbounded,

    #[error("degenerate system: {0}")]
    Degenerate(&'static str),

    #[error("reference data has zero norm")]
    ZeroTruth,

    #[error("non-finite value: {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
