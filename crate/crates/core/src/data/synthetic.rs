use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ba::barabasi_albert;
use super::DataError;
use crate::graph::{build_graph, WeightedArc, WeightedDigraph};
use crate::tensor::DenseMatrix;

/// SynComp class ids.
pub const CLASS_BASE: usize = 0;
pub const CLASS_SHOULDER: usize = 1;
pub const CLASS_BOTTOM: usize = 2;
pub const CLASS_TOP: usize = 3;

/// Weights of the four house-edge roles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HouseWeights {
    pub bottom: f64,
    pub wall: f64,
    pub shoulder: f64,
    pub roof: f64,
}

impl Default for HouseWeights {
    fn default() -> Self {
        Self {
            bottom: 1.0,
            wall: 1.0,
            shoulder: 1.0,
            roof: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynCompParams {
    pub ba_nodes: usize,
    pub ba_attachment: usize,
    pub motif_count: usize,
    /// Weight of the arc pair joining each house to the base graph.
    pub attach_weight: f64,
    pub noise_fraction: f64,
    pub noise_weight: f64,
    pub base_weight: f64,
    pub house: HouseWeights,
    pub seed: u64,
}

impl Default for SynCompParams {
    fn default() -> Self {
        Self {
            ba_nodes: 15,
            ba_attachment: 1,
            motif_count: 10,
            attach_weight: 0.1,
            noise_fraction: 0.1,
            noise_weight: 0.1,
            base_weight: 1.0,
            house: HouseWeights::default(),
            seed: 0,
        }
    }
}

/// One attached house: `[shoulder_a, shoulder_b, bottom_a, bottom_b, top]`
/// and the 12 arcs of its six undirected edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Motif {
    pub nodes: [usize; 5],
    pub arcs: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SynComp {
    pub graph: WeightedDigraph,
    pub motifs: Vec<Motif>,
    /// Motif index of every node; `None` for base-graph nodes.
    pub node_motif: Vec<Option<usize>>,
}

impl SynComp {
    /// House arcs of the node's own motif.
    pub fn ground_truth_arcs(&self, node: usize) -> Option<&[usize]> {
        self.node_motif[node].map(|m| self.motifs[m].arcs.as_slice())
    }
}

fn push_undirected(arcs: &mut Vec<WeightedArc>, a: usize, b: usize, w: f64) -> [usize; 2] {
    let first = arcs.len();
    arcs.push(WeightedArc::new(a, b, w));
    arcs.push(WeightedArc::new(b, a, w));
    [first, first + 1]
}

/// Base BA graph with house motifs hanging off random base nodes.
pub fn gen_syncomp(params: &SynCompParams) -> Result<SynComp, DataError> {
    if params.ba_nodes < 2 || params.ba_attachment == 0 {
        return Err(DataError::InvalidParams(
            "base graph needs at least 2 nodes and m >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.ba_nodes + 5 * params.motif_count;
    let mut arcs = Vec::new();
    let mut adjacent: HashSet<(usize, usize)> = HashSet::new();
    let add = |adjacent: &mut HashSet<(usize, usize)>,
               arcs: &mut Vec<WeightedArc>,
               a: usize,
               b: usize,
               w: f64| {
        adjacent.insert((a.min(b), a.max(b)));
        push_undirected(arcs, a, b, w)
    };

    for (a, b) in barabasi_albert(params.ba_nodes, params.ba_attachment, &mut rng) {
        add(&mut adjacent, &mut arcs, a, b, params.base_weight);
    }
    let mut labels = vec![CLASS_BASE; n];
    let mut node_motif = vec![None; n];
    let mut motifs = Vec::with_capacity(params.motif_count);
    let h = params.house;
    for k in 0..params.motif_count {
        let base = params.ba_nodes + 5 * k;
        let [sa, sb, ba, bb, top] = [base, base + 1, base + 2, base + 3, base + 4];
        let mut motif_arcs = Vec::with_capacity(12);
        for (a, b, w) in [
            (ba, bb, h.bottom),
            (sa, ba, h.wall),
            (sb, bb, h.wall),
            (sa, sb, h.shoulder),
            (sa, top, h.roof),
            (sb, top, h.roof),
        ] {
            motif_arcs.extend(add(&mut adjacent, &mut arcs, a, b, w));
        }
        let anchor = rng.random_range(0..params.ba_nodes);
        add(&mut adjacent, &mut arcs, sa, anchor, params.attach_weight);
        for (node, label) in [
            (sa, CLASS_SHOULDER),
            (sb, CLASS_SHOULDER),
            (ba, CLASS_BOTTOM),
            (bb, CLASS_BOTTOM),
            (top, CLASS_TOP),
        ] {
            labels[node] = label;
            node_motif[node] = Some(k);
        }
        motifs.push(Motif {
            nodes: [sa, sb, ba, bb, top],
            arcs: motif_arcs,
        });
    }

    let noise_edges = (params.noise_fraction * n as f64).floor() as usize;
    let max_edges = n * (n - 1) / 2;
    let mut added = 0;
    while added < noise_edges && adjacent.len() < max_edges {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b || adjacent.contains(&(a.min(b), a.max(b))) {
            continue;
        }
        add(&mut adjacent, &mut arcs, a, b, params.noise_weight);
        added += 1;
    }

    let features = DenseMatrix::filled(n, 2, 1.0);
    let graph = build_graph(arcs, features, Some(labels), 4)?;
    Ok(SynComp {
        graph,
        motifs,
        node_motif,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynNodeParams {
    pub nodes: usize,
    pub ba_attachment: usize,
    pub class_count: usize,
    /// Standard deviation of the shared noise term.
    pub noise_std: f64,
    /// Class offset step on the second feature.
    pub class_step: f64,
    pub seed: u64,
}

impl Default for SynNodeParams {
    fn default() -> Self {
        Self {
            nodes: 60,
            ba_attachment: 2,
            class_count: 4,
            noise_std: 0.1,
            class_step: 0.2,
            seed: 0,
        }
    }
}

/// SynNode features for one node: `(s, s + (y + 1)·step)`.
pub fn synnode_features(noise: f64, label: usize, step: f64) -> [f64; 2] {
    [noise, noise + (label as f64 + 1.0) * step]
}

/// Sparse BA topology with label-carrying node features.
pub fn gen_synnode(params: &SynNodeParams) -> Result<WeightedDigraph, DataError> {
    if params.nodes < 2 || params.class_count == 0 {
        return Err(DataError::InvalidParams(
            "need at least 2 nodes and 1 class".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut edges = barabasi_albert(params.nodes, params.ba_attachment, &mut rng);
    edges.shuffle(&mut rng);
    edges.truncate(edges.len() - edges.len() / 2);
    edges.sort_unstable();

    let normal = Normal::new(0.0, params.noise_std)
        .map_err(|e| DataError::InvalidParams(format!("noise std: {e}")))?;
    let labels: Vec<usize> = (0..params.nodes)
        .map(|_| rng.random_range(0..params.class_count))
        .collect();
    let mut features = DenseMatrix::zeros(params.nodes, 2);
    for (node, &y) in labels.iter().enumerate() {
        let s = normal.sample(&mut rng);
        features
            .row_mut(node)
            .copy_from_slice(&synnode_features(s, y, params.class_step));
    }
    let mut arcs = Vec::with_capacity(edges.len() * 2);
    for (a, b) in edges {
        push_undirected(&mut arcs, a, b, 1.0);
    }
    Ok(build_graph(
        arcs,
        features,
        Some(labels),
        params.class_count,
    )?)
}

/// Seeded shuffle split; both halves come back sorted.
pub fn random_split(node_count: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..node_count).collect();
    ids.shuffle(&mut rng);
    let cut = (train_fraction * node_count as f64).round() as usize;
    let mut train = ids[..cut].to_vec();
    let mut test = ids[cut..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syncomp_shape() {
        let d = gen_syncomp(&SynCompParams::default()).unwrap();
        assert_eq!(d.graph.node_count(), 65);
        let mut hist = [0; 4];
        for &l in d.graph.labels().unwrap() {
            hist[l] += 1;
        }
        assert_eq!(hist, [15, 20, 20, 10]);
        // 14 base edges, 10 x (6 + 1) motif edges, 6 noise edges; two arcs each.
        assert_eq!(d.graph.arc_count(), 2 * (14 + 70 + 6));
        for m in &d.motifs {
            assert_eq!(m.arcs.len(), 12);
            for &o in &m.arcs {
                let a = d.graph.arc(o);
                assert!(m.nodes.contains(&a.src) && m.nodes.contains(&a.dst));
            }
        }
    }

    #[test]
    fn syncomp_attachment_and_noise_weights() {
        let p = SynCompParams::default();
        let d = gen_syncomp(&p).unwrap();
        for m in &d.motifs {
            let sa = m.nodes[0];
            let external: Vec<_> = d
                .graph
                .incoming(sa)
                .iter()
                .map(|&o| d.graph.arc(o))
                .filter(|a| !m.nodes.contains(&a.src))
                .collect();
            assert!(!external.is_empty());
            assert!(external
                .iter()
                .any(|a| a.weight == p.attach_weight && a.src < p.ba_nodes));
        }
        assert!(d.graph.arcs().iter().all(|a| a.src != a.dst));
    }

    #[test]
    fn synnode_formula() {
        assert_eq!(synnode_features(0.0, 2, 0.2), [0.0, 0.6000000000000001]);
        let f = synnode_features(0.05, 0, 0.2);
        assert!((f[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn synnode_sparsified() {
        let g = gen_synnode(&SynNodeParams::default()).unwrap();
        assert_eq!(g.node_count(), 60);
        let full = 2 + 2 * 57;
        assert_eq!(g.arc_count(), 2 * (full - full / 2));
    }

    #[test]
    fn split_is_partition() {
        let (tr, te) = random_split(65, 0.6, 4);
        assert_eq!(tr.len(), 39);
        assert_eq!(te.len(), 26);
        let all: HashSet<usize> = tr.iter().chain(&te).copied().collect();
        assert_eq!(all.len(), 65);
    }
}
