use std::io;

use thiserror::Error;

/// Errors raised anywhere in the recognition pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two inputs disagree on size.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A persisted file is malformed.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    /// A correlation input has no variance.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Non-finite values surfaced during computation.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Classifier training could not proceed.
    #[error("training error: {0}")]
    Training(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    /// True for failures caused by non-finite arithmetic rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
