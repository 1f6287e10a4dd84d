//! Weighted directed graphs, in-degree normalization and L-hop
//! computational graphs.

mod computational;
mod io;

use std::collections::HashSet;
use std::sync::Arc;

use thiserror::Error;

use crate::tensor::{DenseMatrix, RowIndex};

pub use computational::{
    computational_graph, extract_subgraph, ComputationalGraph, SelectedSubgraph, Selection,
};
pub use io::{
    read_arcs_csv, read_features_csv, read_labels_csv, write_arcs_csv, write_features_csv,
    write_labels_csv,
};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("arc {src}->{dst} has non-positive or non-finite weight {weight}")]
    NonPositiveWeight { src: usize, dst: usize, weight: f64 },
    #[error("duplicate arc {src}->{dst}")]
    DuplicateArc { src: usize, dst: usize },
    #[error("node id {id} out of range for {node_count} nodes")]
    NodeOutOfRange { id: usize, node_count: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("label {label} of node {node} is outside 0..{class_count}")]
    LabelOutOfRange {
        node: usize,
        label: usize,
        class_count: usize,
    },
    #[error("invalid selection: {0}")]
    InvalidSelection(String),
    #[error("csv error at line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Directed arc `src -> dst` carrying a positive weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedArc {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

impl WeightedArc {
    pub fn new(src: usize, dst: usize, weight: f64) -> Self {
        Self { src, dst, weight }
    }
}

/// Validated weighted digraph with node features and optional labels.
///
/// Arcs keep the order they were supplied in; that order is the arc ordinal
/// used by masks, saliences and ground-truth sets.
#[derive(Debug, Clone)]
pub struct WeightedDigraph {
    node_count: usize,
    arcs: Vec<WeightedArc>,
    features: DenseMatrix,
    labels: Option<Vec<usize>>,
    class_count: usize,
    incoming: Vec<Vec<usize>>,
    src_index: RowIndex,
    dst_index: RowIndex,
}

/// Validates arcs, features and labels and builds the incoming-arc index.
pub fn build_graph(
    arcs: Vec<WeightedArc>,
    features: DenseMatrix,
    labels: Option<Vec<usize>>,
    class_count: usize,
) -> Result<WeightedDigraph, GraphError> {
    let node_count = features.rows();
    let mut seen = HashSet::with_capacity(arcs.len());
    let mut incoming = vec![Vec::new(); node_count];
    for (ordinal, arc) in arcs.iter().enumerate() {
        for id in [arc.src, arc.dst] {
            if id >= node_count {
                return Err(GraphError::NodeOutOfRange { id, node_count });
            }
        }
        if !(arc.weight.is_finite() && arc.weight > 0.0) {
            return Err(GraphError::NonPositiveWeight {
                src: arc.src,
                dst: arc.dst,
                weight: arc.weight,
            });
        }
        if !seen.insert((arc.src, arc.dst)) {
            return Err(GraphError::DuplicateArc {
                src: arc.src,
                dst: arc.dst,
            });
        }
        incoming[arc.dst].push(ordinal);
    }
    if !features.is_finite() {
        return Err(GraphError::DimensionMismatch(
            "features contain non-finite values".into(),
        ));
    }
    if let Some(labels) = &labels {
        if labels.len() != node_count {
            return Err(GraphError::DimensionMismatch(format!(
                "{} labels for {} nodes",
                labels.len(),
                node_count
            )));
        }
        if let Some((node, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(GraphError::LabelOutOfRange {
                node,
                label,
                class_count,
            });
        }
    }
    let src_index: RowIndex = arcs.iter().map(|a| a.src).collect::<Vec<_>>().into();
    let dst_index: RowIndex = arcs.iter().map(|a| a.dst).collect::<Vec<_>>().into();
    Ok(WeightedDigraph {
        node_count,
        arcs,
        features,
        labels,
        class_count,
        incoming,
        src_index,
        dst_index,
    })
}

impl WeightedDigraph {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[WeightedArc] {
        &self.arcs
    }

    pub fn arc(&self, ordinal: usize) -> WeightedArc {
        self.arcs[ordinal]
    }

    pub fn weights(&self) -> Vec<f64> {
        self.arcs.iter().map(|a| a.weight).collect()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn label(&self, node: usize) -> Option<usize> {
        self.labels.as_ref().map(|l| l[node])
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Ordinals of arcs pointing at `node`.
    pub fn incoming(&self, node: usize) -> &[usize] {
        &self.incoming[node]
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.incoming[node].len()
    }

    /// Source node of every arc, in arc order.
    pub fn src_index(&self) -> RowIndex {
        Arc::clone(&self.src_index)
    }

    /// Destination node of every arc, in arc order.
    pub fn dst_index(&self) -> RowIndex {
        Arc::clone(&self.dst_index)
    }

    pub fn find_arc(&self, src: usize, dst: usize) -> Option<usize> {
        self.incoming
            .get(dst)?
            .iter()
            .copied()
            .find(|&o| self.arcs[o].src == src)
    }

    /// Same topology and labels with different features.
    pub fn with_features(&self, features: DenseMatrix) -> Result<Self, GraphError> {
        if features.shape() != self.features.shape() {
            return Err(GraphError::DimensionMismatch(format!(
                "features {:?} vs {:?}",
                features.shape(),
                self.features.shape()
            )));
        }
        let mut g = self.clone();
        g.features = features;
        Ok(g)
    }

    /// Same topology with replaced arc weights (aligned with arc order).
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self, GraphError> {
        if weights.len() != self.arcs.len() {
            return Err(GraphError::DimensionMismatch(format!(
                "{} weights for {} arcs",
                weights.len(),
                self.arcs.len()
            )));
        }
        let arcs = self
            .arcs
            .iter()
            .zip(weights)
            .map(|(a, &w)| WeightedArc::new(a.src, a.dst, w))
            .collect();
        build_graph(
            arcs,
            self.features.clone(),
            self.labels.clone(),
            self.class_count,
        )
    }

    /// Relabels nodes: node `i` becomes `perm[i]`. Arc order is preserved.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, GraphError> {
        if perm.len() != self.node_count {
            return Err(GraphError::DimensionMismatch("permutation length".into()));
        }
        let arcs = self
            .arcs
            .iter()
            .map(|a| WeightedArc::new(perm[a.src], perm[a.dst], a.weight))
            .collect();
        let mut features = DenseMatrix::zeros(self.node_count, self.feature_dim());
        for (old, &new) in perm.iter().enumerate() {
            features
                .row_mut(new)
                .copy_from_slice(self.features.row(old));
        }
        let labels = self.labels.as_ref().map(|l| {
            let mut out = vec![0; l.len()];
            for (old, &new) in perm.iter().enumerate() {
                out[new] = l[old];
            }
            out
        });
        build_graph(arcs, features, labels, self.class_count)
    }
}

/// `ē_vu = e_vu / Σ_v e_vu` over the arcs entering each node, returned in
/// arc order.
pub fn in_degree_normalize(graph: &WeightedDigraph) -> Vec<f64> {
    normalize_incoming(&graph.dst_index, &graph.weights(), graph.node_count)
}

/// In-degree normalization of an arbitrary weight vector over a given
/// destination index.
pub fn normalize_incoming(dst: &[usize], weights: &[f64], node_count: usize) -> Vec<f64> {
    let mut totals = vec![0.0; node_count];
    for (&d, &w) in dst.iter().zip(weights) {
        totals[d] += w;
    }
    dst.iter()
        .zip(weights)
        .map(|(&d, &w)| w / totals[d])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> WeightedDigraph {
        build_graph(
            vec![WeightedArc::new(0, 1, 0.5)],
            DenseMatrix::zeros(2, 2),
            None,
            2,
        )
        .unwrap()
    }

    #[test]
    fn builds_incoming_index() {
        let g = two_node();
        assert_eq!(g.in_degree(1), 1);
        assert_eq!(g.in_degree(0), 0);
    }

    #[test]
    fn rejects_bad_weights() {
        for w in [-1.0, 0.0, f64::NAN, f64::INFINITY] {
            let err = build_graph(
                vec![WeightedArc::new(0, 1, w)],
                DenseMatrix::zeros(2, 1),
                None,
                1,
            )
            .unwrap_err();
            assert!(matches!(
                err,
                GraphError::NonPositiveWeight { src: 0, dst: 1, .. }
            ));
        }
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        let dup = vec![WeightedArc::new(0, 1, 1.0), WeightedArc::new(0, 1, 2.0)];
        assert!(matches!(
            build_graph(dup, DenseMatrix::zeros(2, 1), None, 1),
            Err(GraphError::DuplicateArc { src: 0, dst: 1 })
        ));
        assert!(matches!(
            build_graph(
                vec![WeightedArc::new(0, 5, 1.0)],
                DenseMatrix::zeros(2, 1),
                None,
                1
            ),
            Err(GraphError::NodeOutOfRange { id: 5, .. })
        ));
    }

    #[test]
    fn rejects_label_mismatch() {
        assert!(matches!(
            build_graph(vec![], DenseMatrix::zeros(2, 1), Some(vec![0]), 2),
            Err(GraphError::DimensionMismatch(_))
        ));
        assert!(matches!(
            build_graph(vec![], DenseMatrix::zeros(2, 1), Some(vec![0, 3]), 2),
            Err(GraphError::LabelOutOfRange {
                node: 1,
                label: 3,
                ..
            })
        ));
    }

    #[test]
    fn normalization_examples() {
        let g = build_graph(
            vec![
                WeightedArc::new(0, 2, 2.0),
                WeightedArc::new(1, 2, 2.0),
                WeightedArc::new(0, 3, 1.0),
                WeightedArc::new(1, 3, 3.0),
                WeightedArc::new(2, 4, 0.1),
            ],
            DenseMatrix::zeros(5, 1),
            None,
            1,
        )
        .unwrap();
        let n = in_degree_normalize(&g);
        assert_eq!(n, vec![0.5, 0.5, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn permutation_relabels() {
        let g = build_graph(
            vec![WeightedArc::new(0, 1, 1.0)],
            DenseMatrix::from_rows(&[[1.0], [2.0]]).unwrap(),
            Some(vec![0, 1]),
            2,
        )
        .unwrap();
        let p = g.permuted(&[1, 0]).unwrap();
        assert_eq!(p.arc(0), WeightedArc::new(1, 0, 1.0));
        assert_eq!(p.features().as_slice(), &[2.0, 1.0]);
        assert_eq!(p.labels().unwrap(), &[1, 0]);
    }
}
