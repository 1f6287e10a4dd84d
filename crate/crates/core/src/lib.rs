pub mod data;
pub mod explain;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod tensor;
