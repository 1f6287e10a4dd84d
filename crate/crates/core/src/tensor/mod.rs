//! Dense matrices and a flat reverse-mode differentiation tape.
//!
//! Every trainable or explainable quantity in the crate (layer weights,
//! edge masks, feature masks, edge weights, node features) enters a
//! computation as a [`Tape::leaf`], so a single reverse sweep yields the
//! gradient with respect to any of them.

mod check;
mod matrix;
mod tape;

use thiserror::Error;

pub use check::grad_check;
pub use matrix::DenseMatrix;
pub use tape::{softmax_rows, Gradients, NodeId, Op, OpKind, RowIndex, Tape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("data length {len} does not match shape {rows}x{cols}")]
    DataLength {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("ragged rows: expected {expected} columns, found {found}")]
    RaggedRows { expected: usize, found: usize },
    #[error("shape mismatch in {op:?}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: OpKind,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("index {index} out of range {bound} in {op:?}")]
    IndexOutOfRange {
        op: OpKind,
        index: usize,
        bound: usize,
    },
    #[error("non-finite value produced by {op:?}")]
    NonFinite { op: OpKind },
    #[error("loss must be 1x1, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("node {0} is not on the tape")]
    UnknownNode(usize),
}
