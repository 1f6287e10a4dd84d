//! End-to-end recipes shared by the command line tool and the acceptance
//! suite: dataset bundles, preset training and the evaluation protocols.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    gen_syncomp, gen_synnode, load_bitcoin, random_split, BundleMeta, DataError, DatasetBundle,
    GroundTruth, SynCompParams, SynNodeParams,
};
use crate::explain::{
    explain_edges, ggd_feature_salience, mmi_edge_mask, mmi_feature_mask, mmi_scores, node_seed,
    pda, EdgeMethod, ExplainError, FeatureHyper, FeatureImportance, FeaturePool, MaskHyper,
};
use crate::graph::{computational_graph, extract_subgraph, GraphError, Selection};
use crate::metrics::{
    importance_mse, roc_auc, sample_correct_nodes, summarize_node, DisentangleConfig,
    DisentangleError, MetricsError, NodeSummary,
};
use crate::model::{train, GnnConfig, GnnModel, ModelError, TrainOutcome};

pub const SYNCOMP: &str = "syncomp";
pub const SYNNODE: &str = "synnode";
pub const BITCOIN: &str = "bitcoin";

/// Train share of the seeded split used for both synthetic datasets.
pub const SYNTHETIC_TRAIN_FRACTION: f64 = 0.6;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Disentangle(#[from] DisentangleError),
    #[error("{0}")]
    Unsupported(String),
}

pub fn syncomp_bundle(params: &SynCompParams) -> Result<DatasetBundle, PipelineError> {
    let d = gen_syncomp(params)?;
    let (train, test) = random_split(d.graph.node_count(), SYNTHETIC_TRAIN_FRACTION, params.seed);
    let meta = BundleMeta {
        dataset: SYNCOMP.into(),
        seed: params.seed,
        params: serde_json::to_value(params).expect("params serialize"),
        class_count: d.graph.class_count(),
        train,
        test,
        ground_truth: Some(GroundTruth {
            motifs: d.motifs,
            node_motif: d.node_motif,
        }),
        raw_arc_values: None,
        user_ids: None,
        important_feature: None,
    };
    Ok(DatasetBundle {
        graph: d.graph,
        meta,
    })
}

/// SynNode bundle; feature 1 carries the label by construction.
pub fn synnode_bundle(params: &SynNodeParams) -> Result<DatasetBundle, PipelineError> {
    let graph = gen_synnode(params)?;
    let (train, test) = random_split(graph.node_count(), SYNTHETIC_TRAIN_FRACTION, params.seed);
    let meta = BundleMeta {
        dataset: SYNNODE.into(),
        seed: params.seed,
        params: serde_json::to_value(params).expect("params serialize"),
        class_count: graph.class_count(),
        train,
        test,
        ground_truth: None,
        raw_arc_values: None,
        user_ids: None,
        important_feature: Some(1),
    };
    Ok(DatasetBundle { graph, meta })
}

pub fn bitcoin_bundle(
    path: impl AsRef<Path>,
    cutoff: Option<f64>,
    seed: u64,
) -> Result<DatasetBundle, PipelineError> {
    let path = path.as_ref();
    let d = load_bitcoin(path, cutoff, seed)?;
    let meta = BundleMeta {
        dataset: BITCOIN.into(),
        seed,
        params: serde_json::json!({ "source": path.display().to_string(), "cutoff": cutoff }),
        class_count: d.graph.class_count(),
        train: d.train,
        test: d.test,
        ground_truth: None,
        raw_arc_values: Some(d.raw_scores.iter().map(|&s| s as f64).collect()),
        user_ids: Some(d.user_ids),
        important_feature: None,
    };
    Ok(DatasetBundle {
        graph: d.graph,
        meta,
    })
}

/// Training recipe for a bundle: the rating network gets the wide model,
/// everything else the synthetic one.
pub fn preset_config(bundle: &DatasetBundle, seed: u64) -> GnnConfig {
    let g = &bundle.graph;
    if bundle.meta.dataset == BITCOIN {
        GnnConfig::bitcoin(g.feature_dim(), g.class_count(), seed)
    } else {
        GnnConfig::synthetic(g.feature_dim(), g.class_count(), seed)
    }
}

pub fn train_bundle(
    bundle: &DatasetBundle,
    config: &GnnConfig,
) -> Result<TrainOutcome, PipelineError> {
    Ok(train(
        config,
        &bundle.graph,
        &bundle.meta.train,
        &bundle.meta.test,
    )?)
}

/// Ground-truth agreement of one edge method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeAuc {
    pub method: EdgeMethod,
    /// Mean of the per-node ROC-AUC values.
    pub node_mean: f64,
    /// ROC-AUC over all (node, arc) pairs at once.
    pub pooled: f64,
    pub per_node: Vec<(usize, f64)>,
}

/// ROC-AUC of arc scores against the house arcs, for every `class` node
/// that has a motif. Each node is explained for its true label with its own
/// derived seed.
pub fn ground_truth_auc(
    model: &GnnModel,
    bundle: &DatasetBundle,
    class: usize,
    method: EdgeMethod,
    hyper: &MaskHyper,
) -> Result<EdgeAuc, PipelineError> {
    let gt = bundle
        .meta
        .ground_truth
        .as_ref()
        .ok_or_else(|| PipelineError::Unsupported("bundle has no ground truth".into()))?;
    let labels = bundle
        .graph
        .labels()
        .ok_or_else(|| PipelineError::Unsupported("bundle has no labels".into()))?;
    let mut per_node = Vec::new();
    let (mut scores, mut positive) = (Vec::new(), Vec::new());
    for (u, &y) in labels.iter().enumerate() {
        let Some(arcs) = gt.arcs_for(u).filter(|_| y == class) else {
            continue;
        };
        let house: HashSet<usize> = arcs.iter().copied().collect();
        let comp = computational_graph(&bundle.graph, u, model.num_layers())?;
        let pos: Vec<bool> = comp
            .parent_arcs()
            .iter()
            .map(|o| house.contains(o))
            .collect();
        let h = MaskHyper {
            seed: node_seed(hyper.seed, u),
            ..*hyper
        };
        let (s, _) = explain_edges(model, &comp, y, method, &h)?;
        per_node.push((u, roc_auc(&s.values, &pos)?));
        scores.extend_from_slice(&s.values);
        positive.extend_from_slice(&pos);
    }
    if per_node.is_empty() {
        return Err(MetricsError::Empty.into());
    }
    let node_mean = per_node.iter().map(|p| p.1).sum::<f64>() / per_node.len() as f64;
    Ok(EdgeAuc {
        method,
        node_mean,
        pooled: roc_auc(&scores, &positive)?,
        per_node,
    })
}

/// One repeat of the feature-importance study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRepeat {
    pub seed: u64,
    pub mmi: FeatureImportance,
    pub pda: FeatureImportance,
    pub ggd: FeatureImportance,
}

impl FeatureRepeat {
    pub fn methods(&self) -> [&FeatureImportance; 3] {
        [&self.mmi, &self.pda, &self.ggd]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStudy {
    pub node: usize,
    pub label: usize,
    pub important_feature: usize,
    pub repeats: Vec<FeatureRepeat>,
}

impl FeatureStudy {
    /// Mean MSE of each method (mmi, pda, ggd) against the one-hot target.
    pub fn mean_mse(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for r in &self.repeats {
            for (k, f) in r.methods().iter().enumerate() {
                out[k] += importance_mse(&f.values, self.important_feature);
            }
        }
        out.map(|v| v / self.repeats.len().max(1) as f64)
    }
}

/// The first correctly classified test node: its MMI top-`top_k` subgraph
/// is explained by all three feature methods for `repeats` seeds.
pub fn feature_study(
    model: &GnnModel,
    bundle: &DatasetBundle,
    top_k: usize,
    repeats: u64,
    pda_samples: usize,
) -> Result<FeatureStudy, PipelineError> {
    let important_feature = bundle.meta.important_feature.ok_or_else(|| {
        PipelineError::Unsupported("bundle has no known important feature".into())
    })?;
    let g = &bundle.graph;
    let labels = g
        .labels()
        .ok_or_else(|| PipelineError::Unsupported("bundle has no labels".into()))?;
    let pred = model.predict_classes(g)?;
    let node = *bundle
        .meta
        .test
        .iter()
        .find(|&&i| pred[i] == labels[i] && !g.incoming(i).is_empty())
        .ok_or_else(|| PipelineError::Unsupported("no correctly classified test node".into()))?;
    let label = labels[node];
    let comp = computational_graph(g, node, model.num_layers())?;
    let hyper = MaskHyper {
        seed: node_seed(0, node),
        ..MaskHyper::default()
    };
    let run = mmi_edge_mask(model, &comp, label, &hyper)?;
    let scores = mmi_scores(&run.mask, &comp);
    let sub = extract_subgraph(&comp, &scores.values, Selection::TopK(top_k))?.induced(&comp)?;
    let pool = FeaturePool::from_graph(g, &bundle.meta.train)?;
    let ggd = ggd_feature_salience(model, &comp, label)?;
    let repeats = (0..repeats)
        .map(|seed| -> Result<FeatureRepeat, PipelineError> {
            let fh = FeatureHyper {
                seed,
                ..FeatureHyper::default()
            };
            Ok(FeatureRepeat {
                seed,
                mmi: mmi_feature_mask(model, &sub, label, &fh)?.importance(),
                pda: pda(model, &sub, label, &pool, pda_samples, seed)?,
                ggd: ggd.clone(),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(FeatureStudy {
        node,
        label,
        important_feature,
        repeats,
    })
}

/// Samples correctly classified nodes and summarizes each one. Summaries
/// come back grouped by class, nodes ascending.
pub fn summarize_sample(
    model: &GnnModel,
    bundle: &DatasetBundle,
    config: &DisentangleConfig,
) -> Result<Vec<NodeSummary>, PipelineError> {
    let pred = model.predict_classes(&bundle.graph)?;
    let groups = sample_correct_nodes(&bundle.graph, &pred, config.per_class, config.seed)?;
    let pool = FeaturePool::from_graph(&bundle.graph, &bundle.meta.train).ok();
    Ok(groups
        .iter()
        .flatten()
        .map(|&u| summarize_node(model, &bundle.graph, u, config, pool.as_ref()))
        .collect::<Result<_, _>>()?)
}

/// Share of `class` summaries whose selected arcs include one with a raw
/// value below zero. `None` when the bundle keeps no raw values or no
/// summary has that class.
pub fn negative_arc_share(
    bundle: &DatasetBundle,
    model: &GnnModel,
    summaries: &[NodeSummary],
    class: usize,
    top_k: usize,
) -> Result<Option<f64>, PipelineError> {
    let Some(raw) = bundle.meta.raw_arc_values.as_ref() else {
        return Ok(None);
    };
    let (mut hit, mut total) = (0usize, 0usize);
    for s in summaries.iter().filter(|s| s.explained.class == class) {
        let comp = computational_graph(&bundle.graph, s.node, model.num_layers())?;
        let sel = extract_subgraph(&comp, &s.explained.scores, Selection::TopK(top_k))?;
        total += 1;
        if sel.arcs.iter().any(|&o| raw[comp.parent_arc(o)] < 0.0) {
            hit += 1;
        }
    }
    Ok((total > 0).then(|| hit as f64 / total as f64))
}
