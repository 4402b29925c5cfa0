//! Streaming approximate nearest neighbor index with traffic-adaptive topology.
//!
//! The index maintains a navigable graph whose edges carry decaying importance
//! scores. Searches reinforce the edges they traverse, a two-level hierarchy is
//! periodically rebuilt from per-node query traffic, and deletions dispatch
//! between an O(1) bypass path for cold nodes and an O(k) beam-search repair
//! for high-traffic hubs. Vectors live in a quantized hot/cold storage tier
//! backed by a memory-mapped file.

pub mod bench;
pub mod deletion;
pub mod edgestore;
pub mod graph;
pub mod hierarchy;
pub mod storage;
pub mod vecmath;
pub mod visited;

pub use deletion::{DeleteKind, DeletionConfig, HubThreshold};
pub use edgestore::{DecayConfig, EdgeStore, MyelialEdge};
pub use graph::{GrowthConfig, IndexOptions, MyceliumIndex, SearchScratch};
pub use hierarchy::{Hierarchy, RefreshPolicy};
pub use storage::{StorageConfig, VectorStore};
pub use vecmath::{QuantizationParams, QuantizedVector};

/// Dense handle for a vector/graph node. Indexes array-backed stores directly.
pub type NodeId = u32;

/// Monotone counter of top-level search operations; the time base for decay.
pub type Tick = u64;

/// Errors surfaced by index and harness operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is deleted")]
    NodeDeleted(NodeId),
    #[error("node {0} is not deleted")]
    NodeNotDeleted(NodeId),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quantizer not fitted")]
    QuantizerNotFitted,
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
