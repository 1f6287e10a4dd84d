use std::collections::VecDeque;

use super::{build_graph, GraphError, WeightedArc, WeightedDigraph};
use crate::tensor::DenseMatrix;

/// The L-hop in-neighborhood of a center node, re-indexed locally.
///
/// Local node ids are assigned in ascending parent-id order; local arcs keep
/// the relative order they had in the parent graph.
#[derive(Debug, Clone)]
pub struct ComputationalGraph {
    center: usize,
    graph: WeightedDigraph,
    to_parent: Vec<usize>,
    parent_arcs: Vec<usize>,
    parent_pairs: Vec<(usize, usize)>,
}

impl ComputationalGraph {
    /// Center node, local id.
    pub fn center(&self) -> usize {
        self.center
    }

    /// Center node, parent id.
    pub fn center_parent(&self) -> usize {
        self.to_parent[self.center]
    }

    pub fn graph(&self) -> &WeightedDigraph {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// Number of arcs `Q`.
    pub fn arc_count(&self) -> usize {
        self.graph.arc_count()
    }

    pub fn to_parent(&self, local: usize) -> usize {
        self.to_parent[local]
    }

    pub fn parent_nodes(&self) -> &[usize] {
        &self.to_parent
    }

    pub fn to_local(&self, parent: usize) -> Option<usize> {
        self.to_parent.binary_search(&parent).ok()
    }

    /// Parent-graph ordinal of local arc `ordinal`.
    pub fn parent_arc(&self, ordinal: usize) -> usize {
        self.parent_arcs[ordinal]
    }

    pub fn parent_arcs(&self) -> &[usize] {
        &self.parent_arcs
    }

    /// `(v, u)` parent ids of local arc `ordinal`.
    pub fn arc_pair(&self, ordinal: usize) -> (usize, usize) {
        self.parent_pairs[ordinal]
    }

    /// Local ordinals of the arcs entering the center.
    pub fn center_incoming(&self) -> &[usize] {
        self.graph.incoming(self.center)
    }

    fn from_parts(
        center_parent: usize,
        parent: &WeightedDigraph,
        mut nodes: Vec<usize>,
        arc_ordinals: Vec<usize>,
        weight_of: impl Fn(usize) -> WeightedArc,
    ) -> Result<Self, GraphError> {
        nodes.sort_unstable();
        nodes.dedup();
        let local = |p: usize| nodes.binary_search(&p).expect("arc endpoint kept");
        let arcs: Vec<WeightedArc> = arc_ordinals
            .iter()
            .map(|&o| {
                let a = weight_of(o);
                WeightedArc::new(local(a.src), local(a.dst), a.weight)
            })
            .collect();
        let mut features = DenseMatrix::zeros(nodes.len(), parent.feature_dim());
        for (i, &p) in nodes.iter().enumerate() {
            features
                .row_mut(i)
                .copy_from_slice(parent.features().row(p));
        }
        let labels = parent
            .labels()
            .map(|l| nodes.iter().map(|&p| l[p]).collect());
        let parent_pairs = arc_ordinals
            .iter()
            .map(|&o| {
                let a = weight_of(o);
                (a.src, a.dst)
            })
            .collect();
        let graph = build_graph(arcs, features, labels, parent.class_count())?;
        Ok(Self {
            center: local(center_parent),
            graph,
            to_parent: nodes,
            parent_arcs: arc_ordinals,
            parent_pairs,
        })
    }
}

/// Extracts the computational graph of `center` for an `hops`-layer model.
///
/// Keeps every node with a directed path to `center` of length at most
/// `hops`, and every arc whose head reaches `center` within `hops - 1`
/// steps; those are exactly the arcs an `hops`-layer message-passing model
/// reads when predicting `center`.
pub fn computational_graph(
    graph: &WeightedDigraph,
    center: usize,
    hops: usize,
) -> Result<ComputationalGraph, GraphError> {
    if center >= graph.node_count() {
        return Err(GraphError::NodeOutOfRange {
            id: center,
            node_count: graph.node_count(),
        });
    }
    if hops == 0 {
        return Err(GraphError::InvalidSelection(
            "hop count must be at least 1".into(),
        ));
    }
    let mut dist = vec![usize::MAX; graph.node_count()];
    dist[center] = 0;
    let mut queue = VecDeque::from([center]);
    while let Some(node) = queue.pop_front() {
        if dist[node] == hops {
            continue;
        }
        for &o in graph.incoming(node) {
            let src = graph.arc(o).src;
            if dist[src] == usize::MAX {
                dist[src] = dist[node] + 1;
                queue.push_back(src);
            }
        }
    }
    let nodes: Vec<usize> = (0..graph.node_count())
        .filter(|&n| dist[n] <= hops)
        .collect();
    let arcs: Vec<usize> = (0..graph.arc_count())
        .filter(|&o| dist[graph.arc(o).dst] < hops)
        .collect();
    ComputationalGraph::from_parts(center, graph, nodes, arcs, |o| graph.arc(o))
}

/// How many scored arcs to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    TopK(usize),
    Threshold(f64),
}

/// Arcs retained from a computational graph, with their incident nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedSubgraph {
    /// Local arc ordinals, ordered by descending score (ties by ordinal).
    pub arcs: Vec<usize>,
    /// Local node ids touched by retained arcs, plus the center; ascending.
    pub nodes: Vec<usize>,
    /// Set when `TopK(k)` asked for more arcs than exist.
    pub clamped: bool,
}

impl SelectedSubgraph {
    /// Materializes the selection as its own graph, with ids mapped back to
    /// the comp-graph's parent.
    pub fn induced(&self, comp: &ComputationalGraph) -> Result<ComputationalGraph, GraphError> {
        let parent_nodes: Vec<usize> = self.nodes.iter().map(|&n| comp.to_parent(n)).collect();
        let mut ordinals = self.arcs.clone();
        ordinals.sort_unstable();
        // Parent features and labels are looked up through a synthetic parent
        // that is the comp-graph itself; translate afterwards.
        let local = ComputationalGraph::from_parts(
            comp.center(),
            comp.graph(),
            self.nodes.clone(),
            ordinals.clone(),
            |o| comp.graph().arc(o),
        )?;
        Ok(ComputationalGraph {
            center: local.center,
            graph: local.graph,
            to_parent: parent_nodes,
            parent_arcs: ordinals.iter().map(|&o| comp.parent_arc(o)).collect(),
            parent_pairs: ordinals.iter().map(|&o| comp.arc_pair(o)).collect(),
        })
    }
}

/// Keeps the best-scoring arcs of `comp` and drops nodes left isolated.
/// The center is always kept.
pub fn extract_subgraph(
    comp: &ComputationalGraph,
    scores: &[f64],
    selection: Selection,
) -> Result<SelectedSubgraph, GraphError> {
    let q = comp.arc_count();
    if scores.len() != q {
        return Err(GraphError::DimensionMismatch(format!(
            "{} scores for {} arcs",
            scores.len(),
            q
        )));
    }
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let (arcs, clamped) = match selection {
        Selection::TopK(k) => {
            if k == 0 {
                return Err(GraphError::InvalidSelection("k must be at least 1".into()));
            }
            let clamped = k > q;
            order.truncate(k.min(q));
            (order, clamped)
        }
        Selection::Threshold(tau) => {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(GraphError::InvalidSelection(format!(
                    "threshold {tau} outside (0,1)"
                )));
            }
            order.retain(|&o| scores[o] >= tau);
            (order, false)
        }
    };
    let mut nodes = vec![comp.center()];
    for &o in &arcs {
        let a = comp.graph().arc(o);
        nodes.push(a.src);
        nodes.push(a.dst);
    }
    nodes.sort_unstable();
    nodes.dedup();
    Ok(SelectedSubgraph {
        arcs,
        nodes,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, arcs: &[(usize, usize)]) -> WeightedDigraph {
        build_graph(
            arcs.iter()
                .map(|&(s, d)| WeightedArc::new(s, d, 1.0))
                .collect(),
            DenseMatrix::zeros(n, 1),
            None,
            1,
        )
        .unwrap()
    }

    #[test]
    fn star_one_hop() {
        let g = graph(3, &[(1, 0), (2, 0)]);
        let c = computational_graph(&g, 0, 1).unwrap();
        assert_eq!(c.node_count(), 3);
        assert_eq!(c.arc_count(), 2);
    }

    #[test]
    fn chain_respects_hops() {
        // a=0 -> b=1 -> u=2
        let g = graph(3, &[(0, 1), (1, 2)]);
        let c1 = computational_graph(&g, 2, 1).unwrap();
        assert_eq!(c1.parent_nodes(), &[1, 2]);
        assert_eq!(c1.arc_count(), 1);
        let c3 = computational_graph(&g, 2, 3).unwrap();
        assert_eq!(c3.parent_nodes(), &[0, 1, 2]);
        assert_eq!(c3.arc_count(), 2);
    }

    #[test]
    fn invalid_center_and_hops() {
        let g = graph(2, &[(0, 1)]);
        assert!(matches!(
            computational_graph(&g, 7, 1),
            Err(GraphError::NodeOutOfRange { id: 7, .. })
        ));
        assert!(computational_graph(&g, 1, 0).is_err());
    }

    #[test]
    fn arcs_out_of_center_excluded_at_one_hop() {
        let g = graph(3, &[(0, 1), (1, 0), (1, 2)]);
        let c = computational_graph(&g, 1, 1).unwrap();
        assert_eq!(c.arc_count(), 1);
        assert_eq!(c.arc_pair(0), (0, 1));
    }

    #[test]
    fn top_k_and_ties() {
        let g = graph(4, &[(1, 0), (2, 0), (3, 0)]);
        let c = computational_graph(&g, 0, 1).unwrap();
        let s = extract_subgraph(&c, &[0.9, 0.1, 0.8], Selection::TopK(2)).unwrap();
        let mut arcs = s.arcs.clone();
        arcs.sort();
        assert_eq!(arcs, vec![0, 2]);
        let t = extract_subgraph(&c, &[0.5, 0.5, 0.5], Selection::TopK(2)).unwrap();
        assert_eq!(t.arcs, vec![0, 1]);
        let clamp = extract_subgraph(&c, &[0.5, 0.5, 0.5], Selection::TopK(9)).unwrap();
        assert!(clamp.clamped);
        assert_eq!(clamp.arcs.len(), 3);
    }

    #[test]
    fn threshold_keeps_center_when_empty() {
        let g = graph(3, &[(1, 0), (2, 0)]);
        let c = computational_graph(&g, 0, 1).unwrap();
        let s = extract_subgraph(&c, &[0.1, 0.2], Selection::Threshold(0.5)).unwrap();
        assert!(s.arcs.is_empty());
        assert_eq!(s.nodes, vec![c.center()]);
        assert!(extract_subgraph(&c, &[0.1, 0.2], Selection::Threshold(1.5)).is_err());
        assert!(extract_subgraph(&c, &[0.1, 0.2], Selection::TopK(0)).is_err());
    }

    #[test]
    fn induced_subgraph_maps_to_parent() {
        let g = graph(4, &[(1, 0), (2, 1), (3, 0)]);
        let c = computational_graph(&g, 0, 2).unwrap();
        let scores: Vec<f64> = (0..c.arc_count())
            .map(|o| if c.arc_pair(o) == (3, 0) { 0.1 } else { 0.9 })
            .collect();
        let s = extract_subgraph(&c, &scores, Selection::TopK(2)).unwrap();
        let sub = s.induced(&c).unwrap();
        assert_eq!(sub.parent_nodes(), &[0, 1, 2]);
        assert_eq!(sub.center_parent(), 0);
        assert_eq!(sub.arc_count(), 2);
        for o in 0..sub.arc_count() {
            let (v, u) = sub.arc_pair(o);
            let a = sub.graph().arc(o);
            assert_eq!((sub.to_parent(a.src), sub.to_parent(a.dst)), (v, u));
        }
    }
}
