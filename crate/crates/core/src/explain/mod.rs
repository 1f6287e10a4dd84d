//! Post-hoc explanations of a trained node classifier.
//!
//! Edge methods score every arc of a node's computational graph: the MMI
//! mask (softmax-renormalized mask learned by projected gradient descent),
//! guided gradients, and an unconstrained sigmoid mask used as a baseline.
//! Feature methods score the node-feature dimensions: an MMI feature mask,
//! prediction difference analysis, and guided gradients.

mod components;
mod features;

use thiserror::Error;

use crate::graph::GraphError;
use crate::model::ModelError;
use crate::tensor::TensorError;

pub use components::{
    baseline_sigmoid_mask, center_entropy, explain_edges, ggd_edge_salience, mask_loss,
    mmi_edge_mask, mmi_edge_mask_observed, mmi_scores, node_seed, renormalize_mask,
    EdgeExplanation, EdgeMask, EdgeMethod, EdgeSalience, ExplainedArc, MaskHyper, MaskRun,
    LOG_FLOOR,
};
pub use features::{
    average_ranks, ggd_feature_salience, mmi_feature_mask, mmi_feature_mask_observed, pda,
    rank_aggregate, sample_reparam_z, FeatureExplanation, FeatureHyper, FeatureImportance,
    FeatureMaskRun, FeatureMethod, FeaturePool, MaskInit, RankAggregate,
};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("nothing to mask: the computational graph has no arcs")]
    NothingToMask,
    #[error("explanation subgraph is empty")]
    EmptySubgraph,
    #[error("training pool is empty")]
    EmptyPool,
    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
