use std::fmt::Write;

use crate::graph::{ComputationalGraph, SelectedSubgraph};

/// Renders a selected explanation subgraph as a DOT digraph using parent
/// node ids. The center is drawn as a filled double circle.
///
/// `arc_labels`, when given, is indexed by parent arc ordinal (e.g. raw
/// rating scores); otherwise arcs are labelled with their graph weight.
pub fn export_dot(
    comp: &ComputationalGraph,
    selection: &SelectedSubgraph,
    arc_labels: Option<&[f64]>,
) -> String {
    let mut out = String::from("digraph explanation {\n");
    let center = comp.center();
    for &n in &selection.nodes {
        let id = comp.to_parent(n);
        if n == center {
            let _ = writeln!(
                out,
                "  {id} [shape=doublecircle, style=filled, fillcolor=gold];"
            );
        } else {
            let _ = writeln!(out, "  {id};");
        }
    }
    let mut arcs = selection.arcs.clone();
    arcs.sort_unstable();
    for o in arcs {
        let (src, dst) = comp.arc_pair(o);
        let label = match arc_labels {
            Some(l) => l[comp.parent_arc(o)],
            None => comp.graph().arc(o).weight,
        };
        let _ = writeln!(out, "  {src} -> {dst} [label=\"{label}\"];");
    }
    out.push_str("}\n");
    out
}
