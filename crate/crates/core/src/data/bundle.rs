use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::synthetic::Motif;
use super::DataError;
use crate::graph::{
    build_graph, read_arcs_csv, read_features_csv, read_labels_csv, write_arcs_csv,
    write_features_csv, write_labels_csv, WeightedDigraph,
};

pub const GRAPH_FILE: &str = "graph.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const META_FILE: &str = "meta.json";

/// House motifs and the motif each node belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub motifs: Vec<Motif>,
    pub node_motif: Vec<Option<usize>>,
}

impl GroundTruth {
    pub fn arcs_for(&self, node: usize) -> Option<&[usize]> {
        self.node_motif
            .get(node)
            .copied()
            .flatten()
            .map(|m| self.motifs[m].arcs.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub dataset: String,
    pub seed: u64,
    /// Generator or loader parameters, as given.
    pub params: serde_json::Value,
    pub class_count: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
    /// Pre-normalization value of each arc, for display.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_arc_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_ids: Option<Vec<u64>>,
    /// Feature index that carries the label, when known by construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub important_feature: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub graph: WeightedDigraph,
    pub meta: BundleMeta,
}

pub fn write_bundle(dir: impl AsRef<Path>, bundle: &DatasetBundle) -> Result<(), DataError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let g = &bundle.graph;
    write_arcs_csv(
        BufWriter::new(File::create(dir.join(GRAPH_FILE))?),
        g.arcs(),
    )?;
    write_features_csv(
        BufWriter::new(File::create(dir.join(FEATURES_FILE))?),
        g.features(),
    )?;
    if let Some(labels) = g.labels() {
        write_labels_csv(BufWriter::new(File::create(dir.join(LABELS_FILE))?), labels)?;
    }
    let meta = serde_json::to_string_pretty(&bundle.meta).expect("meta serializes");
    fs::write(dir.join(META_FILE), meta + "\n")?;
    Ok(())
}

pub fn read_bundle(dir: impl AsRef<Path>) -> Result<DatasetBundle, DataError> {
    let dir = dir.as_ref();
    let meta_text = fs::read_to_string(dir.join(META_FILE))?;
    let meta: BundleMeta = serde_json::from_str(&meta_text).map_err(|e| DataError::Malformed {
        line: e.line() as u64,
        message: format!("{META_FILE}: {e}"),
    })?;
    let arcs = read_arcs_csv(BufReader::new(File::open(dir.join(GRAPH_FILE))?))?;
    let features = read_features_csv(BufReader::new(File::open(dir.join(FEATURES_FILE))?))?;
    let labels_path = dir.join(LABELS_FILE);
    let labels = if labels_path.exists() {
        Some(read_labels_csv(BufReader::new(File::open(labels_path)?))?)
    } else {
        None
    };
    let graph = build_graph(arcs, features, labels, meta.class_count)?;
    Ok(DatasetBundle { graph, meta })
}
