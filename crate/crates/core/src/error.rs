use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its valid domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The input data is unusable (non-finite entries, zero columns, ...).
    #[error("invalid data: {0}")]
    Data(String),

    /// A factorization or eigendecomposition failed.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An iterative solver hit its iteration cap.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// The TREX solver could not produce a single admissible iterate.
    #[error("solver failure: {0}")]
    Solver(String),

    /// A per-node failure, tagged with the 1-based node label.
    #[error("node {node}: {source}")]
    Node {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn at_node(self, node_k: usize) -> Self {
        Error::Node {
            node: node_k + 1,
            source: Box::new(self),
        }
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
