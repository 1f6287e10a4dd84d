use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::graph::{ComputationalGraph, SelectedSubgraph};

/// Largest node count the exact search accepts.
pub const EXACT_NODE_LIMIT: usize = 10;
/// Below this size the approximate mode runs the exact search.
pub const APPROX_EXACT_CUTOFF: usize = 6;

/// Small unlabeled directed graph with weighted arcs, used for comparing
/// explanation subgraphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallGraph {
    pub node_count: usize,
    pub arcs: Vec<(usize, usize, f64)>,
}

impl SmallGraph {
    pub fn new(node_count: usize, arcs: Vec<(usize, usize, f64)>) -> Self {
        debug_assert!(arcs
            .iter()
            .all(|&(s, d, _)| s < node_count && d < node_count));
        Self { node_count, arcs }
    }

    /// Unit-weight graph from arc pairs.
    pub fn unweighted(node_count: usize, arcs: &[(usize, usize)]) -> Self {
        Self::new(node_count, arcs.iter().map(|&(s, d)| (s, d, 1.0)).collect())
    }

    /// The selected arcs and nodes of an explanation, carrying the
    /// computational graph's arc weights.
    pub fn from_selection(comp: &ComputationalGraph, selection: &SelectedSubgraph) -> Self {
        let pos = |local: usize| {
            selection
                .nodes
                .binary_search(&local)
                .expect("selected node")
        };
        let mut ordinals = selection.arcs.clone();
        ordinals.sort_unstable();
        let arcs = ordinals
            .into_iter()
            .map(|o| {
                let a = comp.graph().arc(o);
                (pos(a.src), pos(a.dst), a.weight)
            })
            .collect();
        Self::new(selection.nodes.len(), arcs)
    }

    fn adjacency(&self, size: usize) -> Vec<bool> {
        let mut adj = vec![false; size * size];
        for &(s, d, _) in &self.arcs {
            adj[s * size + d] = true;
        }
        adj
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GedMode {
    ExactSmall,
    Approximate,
}

/// Both graphs padded to a common size with isolated nodes.
struct Padded {
    size: usize,
    a: Vec<bool>,
    b: Vec<bool>,
    node_cost: usize,
}

impl Padded {
    fn new(g1: &SmallGraph, g2: &SmallGraph) -> Self {
        let size = g1.node_count.max(g2.node_count);
        Self {
            size,
            a: g1.adjacency(size),
            b: g2.adjacency(size),
            node_cost: g1.node_count.abs_diff(g2.node_count),
        }
    }

    /// Arc mismatches between `a` and `b` pulled back through `map`.
    fn arc_cost(&self, map: &[usize]) -> usize {
        let n = self.size;
        let mut c = 0;
        for i in 0..n {
            for j in 0..n {
                c += (self.a[i * n + j] != self.b[map[i] * n + map[j]]) as usize;
            }
        }
        c
    }

    /// Mismatches contributed by pairs whose larger index is `k`, given that
    /// `map[0..=k]` is fixed.
    fn increment(&self, map: &[usize], k: usize) -> usize {
        let n = self.size;
        let mk = map[k];
        let mut c = (self.a[k * n + k] != self.b[mk * n + mk]) as usize;
        for i in 0..k {
            let mi = map[i];
            c += (self.a[i * n + k] != self.b[mi * n + mk]) as usize;
            c += (self.a[k * n + i] != self.b[mk * n + mi]) as usize;
        }
        c
    }
}

/// Depth-first search over bijections. `visit` sees every complete mapping
/// whose cost is within `slack` of the best found so far, and returns the
/// optimum.
fn search(p: &Padded, slack: usize, visit: &mut dyn FnMut(&[usize], usize)) -> usize {
    let n = p.size;
    let total_a = p.a.iter().filter(|&&x| x).count();
    let total_b = p.b.iter().filter(|&&x| x).count();
    let mut best = usize::MAX;
    let mut map = vec![0usize; n];
    let mut used = vec![false; n];

    #[allow(clippy::too_many_arguments)]
    fn go(
        p: &Padded,
        k: usize,
        cost: usize,
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
        best: &mut usize,
        slack: usize,
        bound_floor: usize,
        visit: &mut dyn FnMut(&[usize], usize),
    ) {
        let n = p.size;
        if k == n {
            if cost <= best.saturating_add(slack) {
                if cost < *best {
                    *best = cost;
                }
                visit(map, cost);
            }
            return;
        }
        for t in 0..n {
            if used[t] {
                continue;
            }
            map[k] = t;
            let c = cost + p.increment(map, k);
            if c.max(bound_floor) > best.saturating_add(slack) {
                continue;
            }
            used[t] = true;
            go(p, k + 1, c, map, used, best, slack, bound_floor, visit);
            used[t] = false;
        }
    }

    if n == 0 {
        visit(&[], 0);
        return 0;
    }
    let floor = total_a.abs_diff(total_b);
    go(p, 0, 0, &mut map, &mut used, &mut best, slack, floor, visit);
    best
}

/// Exact graph edit distance with unit node and arc insertion/deletion costs.
pub fn ged_exact(g1: &SmallGraph, g2: &SmallGraph) -> Result<usize, MetricsError> {
    let size = g1.node_count.max(g2.node_count);
    if size > EXACT_NODE_LIMIT {
        return Err(MetricsError::TooLarge {
            nodes: size,
            limit: EXACT_NODE_LIMIT,
        });
    }
    let p = Padded::new(g1, g2);
    Ok(p.node_cost + search(&p, 0, &mut |_, _| {}))
}

/// Upper bound on the edit distance: degree-ordered greedy matching
/// improved by pairwise swaps until no swap helps. Small inputs use the
/// exact search.
pub fn ged_approx(g1: &SmallGraph, g2: &SmallGraph) -> usize {
    let p = Padded::new(g1, g2);
    if p.size <= APPROX_EXACT_CUTOFF {
        return p.node_cost + search(&p, 0, &mut |_, _| {});
    }
    let n = p.size;
    let degree = |adj: &[bool], v: usize| {
        (0..n)
            .map(|u| adj[v * n + u] as usize + adj[u * n + v] as usize)
            .sum::<usize>()
    };
    let mut order_a: Vec<usize> = (0..n).collect();
    let mut order_b: Vec<usize> = (0..n).collect();
    order_a.sort_by_key(|&v| (std::cmp::Reverse(degree(&p.a, v)), v));
    order_b.sort_by_key(|&v| (std::cmp::Reverse(degree(&p.b, v)), v));
    let mut map = vec![0; n];
    for (&va, &vb) in order_a.iter().zip(&order_b) {
        map[va] = vb;
    }
    let mut cost = p.arc_cost(&map);
    loop {
        let mut improved = false;
        for i in 0..n {
            for j in i + 1..n {
                map.swap(i, j);
                let c = p.arc_cost(&map);
                if c < cost {
                    cost = c;
                    improved = true;
                } else {
                    map.swap(i, j);
                }
            }
        }
        if !improved {
            break;
        }
    }
    p.node_cost + cost
}

pub fn ged(g1: &SmallGraph, g2: &SmallGraph, mode: GedMode) -> Result<usize, MetricsError> {
    match mode {
        GedMode::ExactSmall => ged_exact(g1, g2),
        GedMode::Approximate => Ok(ged_approx(g1, g2)),
    }
}

/// Jensen–Shannon divergence with base-2 logarithms between two
/// distributions, each normalized to sum 1 first.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::LengthMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    if p.is_empty() {
        return Ok(0.0);
    }
    let norm = |v: &[f64]| -> Result<Vec<f64>, MetricsError> {
        let s: f64 = v.iter().sum();
        if !(s > 0.0) || v.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(MetricsError::InvalidDistribution);
        }
        Ok(v.iter().map(|x| x / s).collect())
    };
    let (p, q) = (norm(p)?, norm(q)?);
    let kl = |a: &[f64], m: &[f64]| -> f64 {
        a.iter()
            .zip(m)
            .filter(|(&x, _)| x > 0.0)
            .map(|(&x, &y)| x * (x / y).log2())
            .sum()
    };
    let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok((0.5 * kl(&p, &m) + 0.5 * kl(&q, &m)).clamp(0.0, 1.0))
}

/// JSD between the arc-weight distributions of two isomorphic graphs,
/// minimized over all isomorphisms.
pub fn weighted_jsd(g1: &SmallGraph, g2: &SmallGraph) -> Result<f64, MetricsError> {
    if g1.node_count != g2.node_count || g1.arcs.len() != g2.arcs.len() {
        return Err(MetricsError::NotIsomorphic);
    }
    if g1.arcs.is_empty() {
        return Ok(0.0);
    }
    let p = Padded::new(g1, g2);
    let n = p.size;
    let mut w2 = vec![0.0; n * n];
    for &(s, d, w) in &g2.arcs {
        w2[s * n + d] = w;
    }
    let w1: Vec<f64> = g1.arcs.iter().map(|a| a.2).collect();
    let mut best = f64::INFINITY;
    let mut err = None;
    let mut seen = HashSet::new();
    let opt = search(&p, 0, &mut |map, cost| {
        if cost != 0 {
            return;
        }
        let aligned: Vec<f64> = g1
            .arcs
            .iter()
            .map(|&(s, d, _)| w2[map[s] * n + map[d]])
            .collect();
        let key: Vec<u64> = aligned.iter().map(|v| v.to_bits()).collect();
        if !seen.insert(key) {
            return;
        }
        match jsd(&w1, &aligned) {
            Ok(v) => best = best.min(v),
            Err(e) => err = Some(e),
        }
    });
    if opt != 0 {
        return Err(MetricsError::NotIsomorphic);
    }
    if let Some(e) = err {
        return Err(e);
    }
    Ok(best)
}

/// Edit distance, replaced by the weighted JSD when the graphs are
/// isomorphic. Exact up to the node limit, approximate beyond it.
pub fn graph_distance(g1: &SmallGraph, g2: &SmallGraph) -> Result<f64, MetricsError> {
    let size = g1.node_count.max(g2.node_count);
    let d = if size <= EXACT_NODE_LIMIT {
        ged_exact(g1, g2)?
    } else {
        ged_approx(g1, g2)
    };
    if d == 0 {
        return weighted_jsd(g1, g2);
    }
    Ok(d as f64)
}
