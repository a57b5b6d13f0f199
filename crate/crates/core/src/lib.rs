//! Data-quality-aware imitation learning, end to end on one desk:
//!
//! 1. generate synthetic expert and corrupted demonstrations in a
//!    deterministic planar simulator,
//! 2. score episodes for kinematic smoothness, pre-screen the smoothest,
//!    and replay-validate them into a high-quality positive set,
//! 3. train a positive-unlabeled quality discriminator on top of a frozen
//!    diffusion policy's denoising energies,
//! 4. post-train the diffusion-transformer policy with per-clip quality
//!    weights and evaluate smoothness and success in closed loop.
//!
//! The `demoforge` binary exposes each stage as a subcommand; see the crate
//! README for the full pipeline walk-through.

pub mod diffusion;
pub mod disc;
pub mod episode;
pub mod error;
pub mod jsonio;
pub mod manifest;
pub mod mat;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod sim;
pub mod util;

pub use error::{Error, Result};
pub use mat::Mat;
