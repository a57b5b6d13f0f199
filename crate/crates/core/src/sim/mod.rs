//! Deterministic planar dual-effector simulator: demonstration generation,
//! open-loop replay validation, and closed-loop policy rollout.

pub mod corruption;
pub mod expert;
pub mod rollout;
pub mod task;
pub mod world;

pub use corruption::{generate_demo, CorruptionSpec};
pub use rollout::{replay, rollout_policy, ChunkPolicy, ReplayResult, RolloutOutcome};
pub use task::{TaskKind, TaskSpec, OBS_FEATURES_LEN};
pub use world::{step, WorldState, TOY_DIMS};
