//! Steiner tree toolkit: random instance generation, exact and approximate
//! solvers, learned node scorers, and the heuristics that turn scores into
//! trees.

pub mod approx;
pub mod dataset;
pub mod error;
pub mod exact;
pub mod exec;
pub mod features;
pub mod generators;
pub mod graph;
pub mod harness;
pub mod heuristics;
pub mod models;
pub mod steinlib;

pub use error::{Error, Result};
pub use exec::Execution;
pub use graph::{Edge, Graph, NodeId, SteinerTree, StpInstance, Weight};
