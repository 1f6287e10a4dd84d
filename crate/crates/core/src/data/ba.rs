use rand::Rng;

/// Undirected Barabási–Albert graph on `n` nodes, each new node attaching
/// to `m` distinct existing nodes with probability proportional to degree.
///
/// Starts from a star on `m + 1` nodes. Edges are `(a, b)` with `a < b`,
/// in insertion order.
pub fn barabasi_albert<R: Rng>(n: usize, m: usize, rng: &mut R) -> Vec<(usize, usize)> {
    assert!(m >= 1, "attachment count must be positive");
    if n <= 1 {
        return Vec::new();
    }
    let seed_nodes = (m + 1).min(n);
    let mut edges = Vec::new();
    // Each endpoint occurrence is one ticket in the degree-proportional draw.
    let mut tickets = Vec::new();
    for v in 1..seed_nodes {
        edges.push((0, v));
        tickets.extend([0, v]);
    }
    for v in seed_nodes..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m.min(v) {
            let t = tickets[rng.random_range(0..tickets.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t.min(v), t.max(v)));
            tickets.extend([t, v]);
        }
    }
    edges
}
