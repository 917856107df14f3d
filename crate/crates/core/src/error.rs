use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible allocation: reference {p_ref} kW outside [{lower_sum}, {upper_sum}] kW")]
    Infeasible {
        p_ref: f64,
        lower_sum: f64,
        upper_sum: f64,
    },

    #[error("zero total capacity: every agent has an empty range")]
    ZeroCapacity,

    #[error("ratio denominator is zero at node {node}")]
    ZeroDenominator { node: usize },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("node {node} out of range for a graph of {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("config error in {path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed CSV: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("every instant of the run was infeasible")]
    InfeasibleThroughout,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
