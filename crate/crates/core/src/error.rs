use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("grid mismatch: {left} vs {right} modes")]
    GridMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trajectory blew up at step {step} (t = {time}): {reason}")]
    BlowUp { step: usize, time: f64, reason: String },

    #[error("configuration errors:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("not enough samples: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;
