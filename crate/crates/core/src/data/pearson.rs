use std::collections::HashSet;

use crate::graph::WeightedArc;
use crate::tensor::DenseMatrix;

/// Outcome of weighting a link list: kept arcs plus the links that were
/// dropped and why.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PearsonArcs {
    pub arcs: Vec<WeightedArc>,
    pub nonpositive: Vec<(usize, usize)>,
    pub zero_variance: Vec<(usize, usize)>,
}

/// Pearson correlation; `None` when either vector has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "pearson: length mismatch");
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Weights each undirected link by the correlation of its endpoint features
/// and emits both arc directions. Links with correlation ≤ 0 or a
/// zero-variance endpoint are dropped. Repeated links are weighted once.
pub fn pearson_edge_weights(features: &DenseMatrix, links: &[(usize, usize)]) -> PearsonArcs {
    let mut out = PearsonArcs::default();
    let mut seen = HashSet::new();
    for &(a, b) in links {
        if !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        match pearson(features.row(a), features.row(b)) {
            None => {
                log::warn!("link ({a}, {b}) dropped: zero-variance features");
                out.zero_variance.push((a, b));
            }
            Some(r) if r <= 0.0 => out.nonpositive.push((a, b)),
            Some(r) => {
                out.arcs.push(WeightedArc::new(a, b, r));
                if a != b {
                    out.arcs.push(WeightedArc::new(b, a, r));
                }
            }
        }
    }
    out
}
