//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by the numerical core, data generation, training, and
/// evaluation layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Two operands disagree on shape. Both shapes are named so the caller
    /// can tell which side is wrong.
    #[error("shape mismatch in {context}: {left} vs {right}")]
    ShapeMismatch {
        context: String,
        left: String,
        right: String,
    },

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An API contract was broken by the caller (e.g. a backward pass fed a
    /// cache from a different forward pass, or a scheduler invoked an
    /// operation it must never schedule).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A text artifact (CSV, model file, config) failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn shape(context: impl Into<String>, left: impl Into<String>, right: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            left: left.into(),
            right: right.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
