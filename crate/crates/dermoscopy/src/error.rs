//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An operation was called with arguments violating its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Image bytes could not be decoded.
    #[error("decode error at byte offset {offset}: {reason}")]
    Decode { offset: usize, reason: String },

    /// A mask had no foreground pixels at the requested threshold.
    #[error("empty mask: no pixel meets threshold {threshold}")]
    EmptyMask { threshold: u8 },

    /// A structured text input (manifest, config, store) failed validation.
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    /// Configuration or input data failed a consistency check.
    #[error("validation error: {0}")]
    Validation(String),

    /// Test-split labels were requested before the evaluation phase.
    #[error("staged access violation: test labels read during {phase}")]
    StagedAccess { phase: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for bad inputs, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Contract(_)
            | Error::Decode { .. }
            | Error::EmptyMask { .. }
            | Error::Parse { .. }
            | Error::Validation(_) => 2,
            Error::StagedAccess { .. } | Error::Io { .. } | Error::Json(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
