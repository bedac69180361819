//! Graph-convolutional upsampler.

mod config;
mod graph;
mod layers;
mod loss;
mod matrix;
mod model;
mod train;
mod weights_io;

pub use config::{DenseBlockConfig, LayerRole, LayerShape, NetworkConfig, Variant};
pub use graph::{build_adjacency, GraphAdjacency};
pub use layers::{
    coordinate_head, coordinate_head_backward, gcn_layer, gcn_layer_backward, inception_densegcn,
    inception_densegcn_backward, node_shuffle, node_shuffle_backward, periodic_shuffle, pointwise_layer, refiner,
    refiner_backward, Activation, DenseBlockWeights, LayerWeights, RefinerWeights,
};
pub use loss::chamfer_loss_grad;
pub use matrix::Mat;
pub use model::{backward, backward_with_graphs, forward, forward_with_graphs, GraphSet, Init, NetworkWeights};
pub use train::{history_csv, train, train_pairs, write_history_csv, Adam, EpochRecord, TrainHyper, TrainOutcome};
pub use weights_io::{
    decode_weights, encode_weights, read_weights, sidecar_path, write_weights, WEIGHTS_HEADER_LEN, WEIGHTS_MAGIC,
    WEIGHTS_VERSION,
};

/// Closed-form parameter count of a configuration.
pub fn param_count(config: &NetworkConfig) -> usize {
    config.param_count()
}

/// Parameter bytes stored on disk (float32).
pub fn model_size_bytes(config: &NetworkConfig) -> usize {
    config.model_size_bytes()
}
