use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("infeasible density: {nnz} distinct entries requested in a {n}x{n} matrix")]
    InfeasibleDensity { nnz: u64, n: u64 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid cache config: {0}")]
    InvalidConfig(String),

    #[error("layout error: {0}")]
    Layout(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("mixed inputs: {0}")]
    MixedInputs(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
