//! The detector network: a shared per-attribute encoder, H self-attention
//! heads that each pick out an attribute subset, and a decoder that rebuilds
//! the input from each subset's features.
//!
//! Training minimizes the reconstruction error of every subset plus the
//! cosine similarity between the heads' attention maps, which pushes the
//! heads onto disjoint attributes. At inference the summed squared
//! reconstruction error is the anomaly score.

mod checkpoint;
mod config;
mod detector;
mod network;
mod params;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint,
};
pub use config::{Ablation, Hyperparameters, ModelConfig};
pub use detector::{Detector, EpochStats, StepRecord, TrainingTrace};
pub use network::{disentangling_loss, reconstruction_loss, ForwardArtifacts};
pub use params::{head_count, init_params, HeadParams, LinearParams, ModelParams};
