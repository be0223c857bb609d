use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition or domain invariant was violated.
    #[error("validation: {0}")]
    Validation(String),

    /// A text input (pattern CSV, flow JSON, spec string) failed to parse.
    #[error("parse error ({context}): {msg}")]
    Parse { context: String, msg: String },

    /// Exact-arithmetic intermediate exceeded the fixed-width fast path.
    #[error("checker overflow: {0}")]
    Overflow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn parse(context: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
