//! Fixtures for the criterion benches under `benches/`.

use wgexplain_core::data::{DatasetBundle, SynCompParams};
use wgexplain_core::model::GnnModel;
use wgexplain_core::pipeline::{preset_config, syncomp_bundle, train_bundle};

/// SynComp bundle with a model trained for `epochs` epochs.
pub fn trained_syncomp(epochs: usize) -> (DatasetBundle, GnnModel) {
    let bundle = syncomp_bundle(&SynCompParams::default()).expect("syncomp generates");
    let mut config = preset_config(&bundle, 0);
    config.epochs = epochs;
    let model = train_bundle(&bundle, &config).expect("training runs").model;
    (bundle, model)
}

/// First house node of the given class; node 15 onwards are house nodes.
pub fn house_node(bundle: &DatasetBundle, class: usize) -> usize {
    let labels = bundle.graph.labels().expect("labelled");
    (0..labels.len())
        .find(|&u| labels[u] == class)
        .expect("class present")
}
