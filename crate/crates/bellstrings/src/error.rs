//! Error type shared by all modules.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented range.
    #[error("invalid {name}: {message}")]
    InvalidParam {
        name: &'static str,
        message: String,
    },

    /// Operation undefined on an empty series.
    #[error("series is empty")]
    EmptySeries,

    /// Too little data to run the requested analysis.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The hidden-variable engine exceeded its per-pair step budget.
    #[error("no detector fired within {budget} steps at pair {pair_index}")]
    NonConvergence { pair_index: u64, budget: u64 },

    /// Malformed input data.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
