use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A coordinate fell outside the unit cube.
    #[error("coordinate {value} on axis {axis} is outside [0, 1]")]
    Domain { axis: usize, value: f64 },

    /// The inputs are well formed but the computation is undefined for them,
    /// e.g. isotonizing against a grid with no observations.
    #[error("invalid state: {0}")]
    State(String),

    /// A lookup fell outside the support of a tabulated distribution.
    #[error("{what} = {value} is outside the table support [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// A configuration file or flag was missing or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A data file did not match its schema.
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },

    /// A data row could not be parsed.
    #[error("{path}:{line}: {message}")]
    Row { path: PathBuf, line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad input data rather than bad configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. } | Error::Schema { .. } | Error::Row { .. } | Error::Csv(_) | Error::State(_)
        )
    }
}
