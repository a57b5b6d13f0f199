//! Diffusion-transformer policy: DDPM noising/denoising over action chunks
//! conditioned on joint state, scene features and instruction; weighted
//! training and ancestral sampling.

pub mod embed;
pub mod model;
pub mod sample;
pub mod schedule;
pub mod train;

pub use embed::{instruction_embedding, INSTRUCTION_DIM};
pub use model::{predict_noise, PolicyDims, PolicyInput};
pub use sample::{sample_chunk, PolicyController};
pub use schedule::{forward_diffuse, NoiseSchedule};
pub use train::{
    train_policy, ActionNormalizer, ChunkSource, LossPoint, Policy, PolicyTrainConfig, TrainItem,
};
