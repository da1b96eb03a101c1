use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A tensor or parameter dimension does not satisfy a kernel's precondition.
    #[error("shape mismatch in {op}: {dim} expected {expected}, found {found}")]
    Shape {
        op: &'static str,
        dim: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid argument to {op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    /// Structural problem with a graph (cycles, dangling edges, missing blobs, ...).
    #[error("graph error: {0}")]
    Graph(String),

    /// Shape inference failed on the edge `from -> to`.
    #[error("shape inference failed at edge {from} -> {to}: {msg} (input dims {dims:?})")]
    ShapeInference {
        from: String,
        to: String,
        dims: Vec<[usize; 4]>,
        msg: String,
    },

    /// A tensor kernel failed while executing a particular node.
    #[error("node `{node}`: {source}")]
    Node {
        node: String,
        #[source]
        source: Box<Error>,
    },

    #[error("weight file: {0}")]
    Weights(String),

    #[error("pruning constraint violated: {0}")]
    Prune(String),

    #[error("statistics: {0}")]
    Stats(String),

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("model spec: {0}")]
    Spec(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image {path}: {msg}")]
    Image { path: PathBuf, msg: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(op: &'static str, dim: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape {
            op,
            dim,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument { op, msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_node(self, node: &str) -> Self {
        Error::Node {
            node: node.to_string(),
            source: Box::new(self),
        }
    }
}
