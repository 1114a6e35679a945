use thiserror::Error;

/// Errors produced by the simulator and its building blocks.
#[derive(Debug, Error)]
pub enum XflError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two rules share a feature group and cannot be joined with AND.
    #[error("conflicting rules: {0}")]
    Conflict(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl XflError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        XflError::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        XflError::Parse {
            line,
            message: msg.into(),
        }
    }
}

pub type Result<T, E = XflError> = std::result::Result<T, E>;
