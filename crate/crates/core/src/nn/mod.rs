//! Dense-tensor numerics: reverse-mode differentiation, AdamW, transformer
//! building blocks, and the checkpoint format shared by the policy and the
//! discriminator.

pub mod adamw;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod tape;

pub use adamw::{adamw_step, AdamWConfig, OptimizerState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, RngKind, RngState};
pub use layers::{arch_preset, TransformerArch};
pub use tape::{NodeId, ParamGrads, ParamId, ParamSet, Tape};
