//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("line {line}: {msg}")]
    MalformedLine { line: usize, msg: String },

    #[error("line {line}: unknown label \"{label}\"")]
    UnknownLabel { line: usize, label: String },

    #[error("sequence for example {id} has {len} tokens, exceeds maximum {max}")]
    SequenceTooLong { id: String, len: usize, max: usize },

    #[error("sequence too short: need at least {min} tokens, got {len}")]
    SequenceTooShort { min: usize, len: usize },

    #[error("target class {target} out of range for {num_classes} classes")]
    TargetOutOfRange { target: usize, num_classes: usize },

    #[error("training diverged: loss is not finite at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("empty record list")]
    EmptyRecords,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate marginals")]
    DegenerateMarginals,

    #[error("binary_flip requires exactly 2 classes, got {num_classes}")]
    BinaryFlipArity { num_classes: usize },

    #[error("invalid {field}: {msg}")]
    InvalidConfig { field: &'static str, msg: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for an [`Error::InvalidConfig`].
    pub fn invalid(field: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidConfig { field, msg: msg.into() }
    }
}
