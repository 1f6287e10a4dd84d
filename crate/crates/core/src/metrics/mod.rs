//! Evaluation of explanations.
//!
//! Subgraph comparisons use a unit-cost graph edit distance, falling back to
//! the Jensen–Shannon divergence of arc weights when two subgraphs are
//! isomorphic. On top of that sit the consistency, contrastivity and
//! sparsity summaries, ROC-AUC against planted motifs, feature-importance
//! MSE, and the class-pair distance and similarity maps.

mod disentangle;
mod ged;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::pearson;
use crate::explain::average_ranks;

pub use disentangle::{
    disentangle_maps, sample_correct_nodes, summarize_node, DisentangleConfig, DisentangleError,
    DisentangleResult, NodeSummary,
};
pub use ged::{
    ged, ged_approx, ged_exact, graph_distance, jsd, weighted_jsd, GedMode, SmallGraph,
    APPROX_EXACT_CUTOFF, EXACT_NODE_LIMIT,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("graph has {nodes} nodes, exact search is limited to {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("graphs are not isomorphic")]
    NotIsomorphic,
    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("weights do not form a distribution")]
    InvalidDistribution,
    #[error("ground truth needs at least one positive and one negative")]
    DegenerateLabels,
    #[error("no scores")]
    Empty,
    #[error("class {0} has no entries")]
    EmptyClass(usize),
}

/// Area under the ROC curve via the rank statistic; tied scores count half.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64, MetricsError> {
    if scores.len() != positive.len() {
        return Err(MetricsError::LengthMismatch {
            expected: scores.len(),
            found: positive.len(),
        });
    }
    let pos = positive.iter().filter(|&&p| p).count();
    let neg = positive.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::DegenerateLabels);
    }
    // average_ranks ranks descending from 1; flip to ascending.
    let n = scores.len() as f64;
    let ranks = average_ranks(scores);
    let pos_rank_sum: f64 = ranks
        .iter()
        .zip(positive)
        .filter(|(_, &p)| p)
        .map(|(r, _)| n + 1.0 - r)
        .sum();
    let (pos, neg) = (pos as f64, neg as f64);
    Ok((pos_rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

/// Mean importance score over all arcs.
pub fn sparsity(scores: &[f64]) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Mean squared difference between `softmax(importance)` and the one-hot
/// vector of `target`.
pub fn importance_mse(importance: &[f64], target: usize) -> f64 {
    let top = importance.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = importance.iter().map(|v| (v - top).exp()).collect();
    let total: f64 = ex.iter().sum();
    ex.iter()
        .enumerate()
        .map(|(i, e)| {
            let t = if i == target { 1.0 } else { 0.0 };
            (e / total - t).powi(2)
        })
        .sum::<f64>()
        / importance.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    GedDistance,
    PearsonSimilarity,
}

/// C×C matrix of class-pair averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPairMap {
    pub kind: MapKind,
    pub values: Vec<Vec<f64>>,
    /// Number of pairs behind each cell; 0 leaves the cell at 0.
    pub counts: Vec<Vec<usize>>,
}

impl ClassPairMap {
    pub fn class_count(&self) -> usize {
        self.values.len()
    }

    /// Mean over diagonal cells that have at least one pair.
    pub fn diagonal_mean(&self) -> f64 {
        let cells: Vec<f64> = (0..self.class_count())
            .filter(|&c| self.counts[c][c] > 0)
            .map(|c| self.values[c][c])
            .collect();
        cells.iter().sum::<f64>() / cells.len().max(1) as f64
    }

    /// Mean over off-diagonal cells that have at least one pair.
    pub fn off_diagonal_mean(&self) -> f64 {
        let c = self.class_count();
        let cells: Vec<f64> = (0..c)
            .flat_map(|i| (0..c).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && self.counts[i][j] > 0)
            .map(|(i, j)| self.values[i][j])
            .collect();
        cells.iter().sum::<f64>() / cells.len().max(1) as f64
    }

    /// CSV with a `class` column and one column per class id.
    pub fn to_csv(&self) -> String {
        let c = self.class_count();
        let mut out = String::from("class");
        for j in 0..c {
            out.push_str(&format!(",{j}"));
        }
        out.push('\n');
        for (i, row) in self.values.iter().enumerate() {
            out.push_str(&i.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Averages `dist` over class pairs: all cross pairs off the diagonal,
/// distinct within-class pairs on it. Pairs are visited in sorted order.
fn pair_map<T, F>(
    groups: &[Vec<T>],
    kind: MapKind,
    mut dist: F,
) -> Result<ClassPairMap, MetricsError>
where
    F: FnMut(&T, &T) -> Result<f64, MetricsError>,
{
    if let Some(c) = groups.iter().position(Vec::is_empty) {
        return Err(MetricsError::EmptyClass(c));
    }
    let c = groups.len();
    let mut values = vec![vec![0.0; c]; c];
    let mut counts = vec![vec![0usize; c]; c];
    for a in 0..c {
        for b in a..c {
            let mut sum = 0.0;
            let mut n = 0;
            for (i, x) in groups[a].iter().enumerate() {
                let start = if a == b { i + 1 } else { 0 };
                for y in &groups[b][start..] {
                    sum += dist(x, y)?;
                    n += 1;
                }
            }
            let mean = if n > 0 { sum / n as f64 } else { 0.0 };
            values[a][b] = mean;
            values[b][a] = mean;
            counts[a][b] = n;
            counts[b][a] = n;
        }
    }
    Ok(ClassPairMap {
        kind,
        values,
        counts,
    })
}

/// Class-pair mean `graph_distance` between explanation subgraphs.
pub fn distance_map(groups: &[Vec<SmallGraph>]) -> Result<ClassPairMap, MetricsError> {
    pair_map(groups, MapKind::GedDistance, graph_distance)
}

/// Pearson correlation; zero-variance inputs score 0.
pub fn pearson_or_zero(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(pearson(a, b).unwrap_or_else(|| {
        log::warn!("zero-variance importance vector; correlation taken as 0");
        0.0
    }))
}

/// Class-pair mean Pearson correlation between feature-importance vectors.
pub fn similarity_map(groups: &[Vec<Vec<f64>>]) -> Result<ClassPairMap, MetricsError> {
    pair_map(groups, MapKind::PearsonSimilarity, |a, b| {
        pearson_or_zero(a, b)
    })
}

/// One explained node for the class statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedNode {
    pub class: usize,
    pub subgraph: SmallGraph,
    /// Importance of every computational-graph arc, in [0, 1].
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: usize,
    pub nodes: usize,
    /// Mean within-class distance; `None` for singleton classes.
    pub consistency: Option<f64>,
    pub sparsity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub consistency: f64,
    pub contrastivity: f64,
    pub sparsity: f64,
    pub per_class: Vec<ClassStats>,
}

/// Consistency (mean within-class distance over all within-class pairs),
/// contrastivity (mean distance over all cross-class pairs) and mean
/// sparsity. At most `cap` nodes per class are used, in input order.
pub fn class_ged_stats(
    nodes: &[ExplainedNode],
    class_count: usize,
    cap: Option<usize>,
) -> Result<MetricsReport, MetricsError> {
    let mut groups: Vec<Vec<&ExplainedNode>> = vec![Vec::new(); class_count];
    for n in nodes {
        let g = &mut groups[n.class];
        if cap.is_none_or(|c| g.len() < c) {
            g.push(n);
        }
    }
    let map = pair_map(
        &groups
            .iter()
            .filter(|g| !g.is_empty())
            .cloned()
            .collect::<Vec<_>>(),
        MapKind::GedDistance,
        |a, b| graph_distance(&a.subgraph, &b.subgraph),
    )?;
    let present: Vec<usize> = (0..class_count)
        .filter(|&c| !groups[c].is_empty())
        .collect();
    let (mut within, mut within_n, mut across, mut across_n) = (0.0, 0usize, 0.0, 0usize);
    let mut per_class = Vec::new();
    for (i, &c) in present.iter().enumerate() {
        for (j, _) in present.iter().enumerate() {
            let (v, n) = (map.values[i][j], map.counts[i][j]);
            if i == j {
                within += v * n as f64;
                within_n += n;
            } else if i < j {
                across += v * n as f64;
                across_n += n;
            }
        }
        if groups[c].len() < 2 {
            log::warn!("class {c} has a single explained node; skipped for consistency");
        }
        let sp: Vec<f64> = groups[c]
            .iter()
            .map(|n| sparsity(&n.scores))
            .collect::<Result<_, _>>()?;
        per_class.push(ClassStats {
            class: c,
            nodes: groups[c].len(),
            consistency: (map.counts[i][i] > 0).then(|| map.values[i][i]),
            sparsity: sp.iter().sum::<f64>() / sp.len() as f64,
        });
    }
    let all: Vec<f64> = groups
        .iter()
        .flatten()
        .map(|n| sparsity(&n.scores))
        .collect::<Result<_, _>>()?;
    Ok(MetricsReport {
        consistency: within / within_n.max(1) as f64,
        contrastivity: across / across_n.max(1) as f64,
        sparsity: all.iter().sum::<f64>() / all.len().max(1) as f64,
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        let gt = [true, true, false, false];
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &gt).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5; 4], &gt).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &gt).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.9, 0.2, 0.5, 0.1], &gt).unwrap(), 0.75);
        assert_eq!(
            roc_auc(&[0.1], &[true]),
            Err(MetricsError::DegenerateLabels)
        );
    }

    #[test]
    fn sparsity_examples() {
        assert_eq!(sparsity(&[1.0, 1.0, 0.0, 0.0]).unwrap(), 0.5);
        assert_eq!(sparsity(&[0.0; 3]).unwrap(), 0.0);
        assert_eq!(sparsity(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn mse_examples() {
        assert!(importance_mse(&[-50.0, 50.0], 1) < 1e-40);
        assert_eq!(importance_mse(&[0.0, 0.0], 1), 0.25);
    }

    #[test]
    fn identical_subgraphs_map_to_zero() {
        let g = SmallGraph::unweighted(2, &[(0, 1)]);
        let m = distance_map(&[vec![g.clone(), g.clone()], vec![g.clone()]]).unwrap();
        assert_eq!(m.values, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(m.counts, vec![vec![1, 2], vec![2, 0]]);
        assert!(matches!(
            distance_map(&[vec![g], vec![]]),
            Err(MetricsError::EmptyClass(1))
        ));
    }

    #[test]
    fn similarity_examples() {
        let a = vec![1.0, 0.0, 1.0, 0.0];
        let b = vec![0.0, 1.0, 0.0, 1.0];
        let m = similarity_map(&[vec![a.clone(), a.clone()], vec![b.clone(), b.clone()]]).unwrap();
        assert_eq!(m.values[0][0], 1.0);
        assert_eq!(m.values[1][1], 1.0);
        assert_eq!(m.values[0][1], -1.0);
        assert_eq!(m.values[1][0], -1.0);
        let flat = similarity_map(&[vec![vec![1.0, 1.0], vec![0.0, 1.0]]]).unwrap();
        assert_eq!(flat.values[0][0], 0.0);
    }

    #[test]
    fn class_stats() {
        let tri = SmallGraph::unweighted(3, &[(0, 1), (1, 2)]);
        let pair = SmallGraph::unweighted(2, &[(0, 1)]);
        let node = |class, g: &SmallGraph| ExplainedNode {
            class,
            subgraph: g.clone(),
            scores: vec![1.0, 0.0],
        };
        let nodes = [node(0, &tri), node(0, &tri), node(1, &pair), node(1, &pair)];
        let r = class_ged_stats(&nodes, 2, None).unwrap();
        assert_eq!(r.consistency, 0.0);
        assert_eq!(r.contrastivity, 2.0);
        assert_eq!(r.sparsity, 0.5);
        let capped = class_ged_stats(&nodes, 2, Some(1)).unwrap();
        assert_eq!(capped.per_class[0].consistency, None);
    }

    #[test]
    fn csv_layout() {
        let m = ClassPairMap {
            kind: MapKind::GedDistance,
            values: vec![vec![0.0, 1.5], vec![1.5, 0.0]],
            counts: vec![vec![1, 1], vec![1, 1]],
        };
        assert_eq!(m.to_csv(), "class,0,1\n0,0,1.5\n1,1.5,0\n");
        assert_eq!(m.diagonal_mean(), 0.0);
        assert_eq!(m.off_diagonal_mean(), 1.5);
    }
}
