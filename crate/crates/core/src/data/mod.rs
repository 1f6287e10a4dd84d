//! Dataset generators, loaders and exporters.
//!
//! SynComp hangs house motifs off a small Barabási–Albert graph and gives
//! every node the same features, so labels are only recoverable from
//! topology. SynNode does the opposite: a sparse random topology with labels
//! written into the node features. The Bitcoin loader turns signed trust
//! ratings into a positively weighted graph with four derived classes.

mod ba;
mod bitcoin;
mod bundle;
mod dot;
mod pearson;
mod synthetic;

use thiserror::Error;

use crate::graph::GraphError;

pub use ba::barabasi_albert;
pub use bitcoin::{
    bitcoin_from_records, bitcoin_labels, classify_received, dedup_latest, load_bitcoin,
    read_ratings_csv, renormalize_ratings, stratified_split, BitcoinClass, BitcoinDataset,
    RatingRecord, BITCOIN_TRAIN_FRACTIONS, MIN_RATING_WEIGHT,
};
pub use bundle::{
    read_bundle, write_bundle, BundleMeta, DatasetBundle, GroundTruth, FEATURES_FILE, GRAPH_FILE,
    LABELS_FILE, META_FILE,
};
pub use dot::export_dot;
pub use pearson::{pearson, pearson_edge_weights, PearsonArcs};
pub use synthetic::{
    gen_syncomp, gen_synnode, random_split, synnode_features, HouseWeights, Motif, SynComp,
    SynCompParams, SynNodeParams, CLASS_BASE, CLASS_BOTTOM, CLASS_SHOULDER, CLASS_TOP,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("rating {0} outside [-10, 10]")]
    RatingOutOfRange(f64),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
