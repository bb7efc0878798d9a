//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path} (line {line}): {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("missing data: {0}")]
    Missing(String),

    #[error("infeasible for dyad `{dyad_id}`: {message}")]
    Infeasible { dyad_id: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("rank deficiency: dependent design columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("did not converge after {iterations} iterations: {trace}")]
    NonConvergence { iterations: usize, trace: String },

    #[error("endpoint error: {0}")]
    Endpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn missing(msg: impl Into<String>) -> Self {
        Error::Missing(msg.into())
    }
}
