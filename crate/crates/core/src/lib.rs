pub mod augment;
pub mod cli;
pub mod dataset_io;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod network;
pub mod palette;
pub mod plots;
pub mod resample;
pub mod synth;
pub mod stats;

pub use error::{Error, Result};
