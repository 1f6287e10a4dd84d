//! The edge-weight-aware GNN node classifier.
//!
//! Type I layers scale each message `W1·h_v` by the in-degree-normalized
//! arc weight `ē_vu`; Type II layers embed the weight into a per-arc
//! matrix `f(e_vu)`. Either way messages are aggregated by a plain sum or a
//! GRU gate, combined with `W0·h_u` and passed through ReLU. A linear head
//! and softmax produce class probabilities.

mod checkpoint;
mod config;
mod forward;
mod params;
mod train;

use thiserror::Error;

use crate::graph::GraphError;
use crate::tensor::TensorError;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use config::{Gate, GnnConfig, Mode, Optimizer};
pub use forward::{BoundParams, EdgeInput};
pub use params::{GnnModel, Gru, Head, Layer};
pub use train::{accuracy, train, EpochRecord, TrainOutcome};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("arc-weight override has {found} entries, graph has {expected} arcs")]
    OverrideNotAligned { expected: usize, found: usize },
    #[error("invalid arc-weight override: {0}")]
    InvalidOverride(String),
    #[error("{0}")]
    ModeMismatch(&'static str),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("node {0} appears in both splits or is out of range")]
    OverlappingSplit(usize),
    #[error("graph has no labels")]
    MissingLabels,
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("checkpoint format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
