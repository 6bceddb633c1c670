//! SUIM-Net topologies, training, inference and checkpoints.

mod blocks;
pub mod checkpoint;
mod infer;
mod model;
mod spec;
mod train;

pub use blocks::ResidualBlock;
pub use checkpoint::{bit_identical, load_checkpoint, load_weights, read_checkpoint, save_checkpoint};
pub use infer::{infer_file, infer_image, resolve_labels, resolve_pixel, soft_stack, InferOutput};
pub use model::Network;
pub use spec::{
    DecoderBlockSpec, EncoderStageSpec, FeatureShape, HeadSpec, NetworkSpec, RsbSpec, ShapeTrace, SkipMode, Variant,
    RSB_COUNT,
};
pub use train::{evaluate_loss, fit, fit_sample, fit_with, pixel_accuracy, train_step, History, TrainConfig};
