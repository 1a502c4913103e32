use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulator and its file interfaces.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a documented constraint. `field` is the
    /// dotted path of the offending key (e.g. `pheromone.delta`).
    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// A query argument is out of its domain (unknown id, coordinate off the edge, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A caller broke an operation's precondition, e.g. a deposit earlier than
    /// the last recorded one.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Something that the preconditions say cannot happen.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
