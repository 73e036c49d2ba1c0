use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("graph is disconnected: node {node} is unreachable")]
    Disconnected { node: usize },

    #[error("node set must not be empty")]
    EmptyNodeSet,

    #[error("edge set is not a tree: {0}")]
    NotATree(String),

    #[error("{terminals} terminals exceed the exact solver cap of {cap}; use the 2-approximation instead")]
    TerminalCapExceeded { terminals: usize, cap: usize },

    #[error("brute force is limited to {max} nodes, instance has {n}")]
    TooLarge { n: usize, max: usize },

    #[error("invalid generator config: {0}")]
    InvalidConfig(String),

    #[error("{family} generator with seed {seed} stayed disconnected after {attempts} attempts")]
    GenerationFailed {
        family: String,
        seed: u64,
        attempts: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("model error: {0}")]
    Model(String),

    #[error("feature schema mismatch: model expects {expected}, got {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("state diffusion diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("method {method} returned an invalid tree for instance {instance}")]
    InvalidTree { method: String, instance: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
