//! Per-class explanation sampling feeding the distance and similarity maps.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    class_ged_stats, distance_map, similarity_map, ClassPairMap, ExplainedNode, MetricsError,
    MetricsReport, SmallGraph,
};
use crate::explain::{
    explain_edges, ggd_feature_salience, mmi_feature_mask, node_seed, pda, EdgeMethod,
    ExplainError, FeatureHyper, FeatureMethod, FeaturePool, MaskHyper,
};
use crate::graph::{computational_graph, extract_subgraph, GraphError, Selection, WeightedDigraph};
use crate::model::GnnModel;

#[derive(Debug, Error)]
pub enum DisentangleError {
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("graph has no labels")]
    Unlabeled,
    #[error("PDA needs a training pool")]
    MissingPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisentangleConfig {
    pub per_class: usize,
    pub top_k: usize,
    pub edge_method: EdgeMethod,
    pub feature_method: FeatureMethod,
    pub mask: MaskHyper,
    pub feature: FeatureHyper,
    pub pda_samples: usize,
    pub seed: u64,
}

impl Default for DisentangleConfig {
    fn default() -> Self {
        Self {
            per_class: 50,
            top_k: 4,
            edge_method: EdgeMethod::Mmi,
            feature_method: FeatureMethod::Ggd,
            mask: MaskHyper::default(),
            feature: FeatureHyper::default(),
            pda_samples: 100,
            seed: 0,
        }
    }
}

/// Everything the maps and the class statistics need about one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub node: usize,
    pub explained: ExplainedNode,
    pub features: Vec<f64>,
}

/// Up to `per_class` correctly classified nodes per class, drawn without
/// replacement with a fixed seed and returned in ascending id order.
/// Nodes without incoming arcs have nothing to explain and are skipped.
pub fn sample_correct_nodes(
    graph: &WeightedDigraph,
    predicted: &[usize],
    per_class: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, DisentangleError> {
    let labels = graph.labels().ok_or(DisentangleError::Unlabeled)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..graph.class_count())
        .map(|c| {
            let mut ids: Vec<usize> = (0..labels.len())
                .filter(|&i| labels[i] == c && predicted[i] == c && !graph.incoming(i).is_empty())
                .collect();
            ids.shuffle(&mut rng);
            ids.truncate(per_class);
            ids.sort_unstable();
            ids
        })
        .collect())
}

/// Explains one node: edge salience over its computational graph, the
/// top-k subgraph, and a feature-importance vector.
pub fn summarize_node(
    model: &GnnModel,
    graph: &WeightedDigraph,
    node: usize,
    config: &DisentangleConfig,
    pool: Option<&FeaturePool>,
) -> Result<NodeSummary, DisentangleError> {
    let label = graph.labels().ok_or(DisentangleError::Unlabeled)?[node];
    let comp = computational_graph(graph, node, model.num_layers())?;
    let seed = node_seed(config.seed, node);
    let mask = MaskHyper {
        seed,
        ..config.mask
    };
    let (salience, _) = explain_edges(model, &comp, label, config.edge_method, &mask)?;
    let selection = extract_subgraph(&comp, &salience.values, Selection::TopK(config.top_k))?;
    let features = match config.feature_method {
        FeatureMethod::Ggd => ggd_feature_salience(model, &comp, label)?.values,
        FeatureMethod::Mmi => {
            let sub = selection.induced(&comp)?;
            let hyper = FeatureHyper {
                seed,
                ..config.feature
            };
            mmi_feature_mask(model, &sub, label, &hyper)?.values
        }
        FeatureMethod::Pda => {
            let sub = selection.induced(&comp)?;
            let pool = pool.ok_or(DisentangleError::MissingPool)?;
            pda(model, &sub, label, pool, config.pda_samples, seed)?.values
        }
    };
    Ok(NodeSummary {
        node,
        explained: ExplainedNode {
            class: label,
            subgraph: SmallGraph::from_selection(&comp, &selection),
            scores: salience.values,
        },
        features,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisentangleResult {
    pub distance: ClassPairMap,
    pub similarity: ClassPairMap,
    pub report: MetricsReport,
}

/// Builds both maps and the class statistics from node summaries. Classes
/// without any summary are dropped from the maps.
pub fn disentangle_maps(
    summaries: &[NodeSummary],
    class_count: usize,
) -> Result<DisentangleResult, DisentangleError> {
    let mut graphs: Vec<Vec<SmallGraph>> = vec![Vec::new(); class_count];
    let mut vectors: Vec<Vec<Vec<f64>>> = vec![Vec::new(); class_count];
    for s in summaries {
        graphs[s.explained.class].push(s.explained.subgraph.clone());
        vectors[s.explained.class].push(s.features.clone());
    }
    for (c, g) in graphs.iter().enumerate() {
        if g.is_empty() {
            log::warn!("class {c} has no explained nodes; left out of the maps");
        }
    }
    graphs.retain(|g| !g.is_empty());
    vectors.retain(|v| !v.is_empty());
    let explained: Vec<ExplainedNode> = summaries.iter().map(|s| s.explained.clone()).collect();
    Ok(DisentangleResult {
        distance: distance_map(&graphs)?,
        similarity: similarity_map(&vectors)?,
        report: class_ged_stats(&explained, class_count, None)?,
    })
}
