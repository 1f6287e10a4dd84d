#![allow(dead_code)]

use proptest::prelude::*;
use wgexplain_core::graph::{build_graph, WeightedArc, WeightedDigraph};
use wgexplain_core::model::{Gate, GnnConfig, GnnModel, Mode};
use wgexplain_core::tensor::DenseMatrix;

pub const FEATURES: usize = 2;
pub const CLASSES: usize = 3;

/// Random labelled digraph on `min..=max` nodes: no duplicate arcs,
/// weights in [0.1, 3], features in [-1, 1].
pub fn arb_graph(min: usize, max: usize) -> impl Strategy<Value = WeightedDigraph> {
    (min..=max).prop_flat_map(|n| {
        (
            prop::collection::vec((any::<bool>(), 0.1f64..3.0), n * n),
            prop::collection::vec(-1.0f64..1.0, n * FEATURES),
            prop::collection::vec(0..CLASSES, n),
        )
            .prop_map(move |(cells, x, labels)| {
                let arcs = cells
                    .iter()
                    .enumerate()
                    .filter(|(_, (keep, _))| *keep)
                    .map(|(i, &(_, w))| WeightedArc::new(i / n, i % n, w))
                    .collect();
                let x = DenseMatrix::new(n, FEATURES, x).unwrap();
                build_graph(arcs, x, Some(labels), CLASSES).unwrap()
            })
    })
}

pub fn model(mode: Mode, gate: Gate, layers: usize, seed: u64) -> GnnModel {
    let mut c = GnnConfig::new(mode, gate, FEATURES, 4, layers, CLASSES);
    c.seed = seed;
    GnnModel::init(&c).unwrap()
}

pub fn arb_model(layers: usize) -> impl Strategy<Value = GnnModel> {
    (
        prop_oneof![
            Just((Mode::TypeI, Gate::Sum)),
            Just((Mode::TypeI, Gate::Gru)),
            Just((Mode::TypeII, Gate::Sum)),
            Just((Mode::TypeII, Gate::Gru)),
        ],
        any::<u64>(),
    )
        .prop_map(move |((mode, gate), seed)| model(mode, gate, layers, seed))
}
