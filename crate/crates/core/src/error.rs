use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("numeric input error: {0}")]
    NumericInput(String),

    #[error("invalid group element: {0}")]
    InvalidElement(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("ill-posed pair: {0}")]
    IllPosed(String),

    #[error("enumeration too large: {0}")]
    TooLarge(String),

    #[error("indeterminate: {0}")]
    Indeterminate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
