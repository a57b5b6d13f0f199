//! Open-loop replay validation and closed-loop policy rollout.

use serde::{Deserialize, Serialize};

use crate::episode::{Episode, Source, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::metrics::{self, NormalizationStats, SmoothnessScores};
use crate::sim::task::TaskSpec;
use crate::sim::world::{step, WorldState, TOY_DIMS};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayResult {
    /// Latched: true once the task predicate held at any step.
    pub success: bool,
    pub collision_free: bool,
    pub final_state: WorldState,
}

/// Execute a recorded episode's actions open-loop from the task's canonical
/// initial state. Success latches at the first step the predicate holds;
/// collision-freedom is the inverse of the world's latched collision flag.
pub fn replay(episode: &Episode, spec: &TaskSpec) -> Result<ReplayResult> {
    if episode.task_id != spec.task_id {
        return Err(Error::TaskMismatch {
            episode_task: episode.task_id.clone(),
            spec_task: spec.task_id.clone(),
        });
    }
    if episode.dims != TOY_DIMS {
        return Err(Error::DimMismatch {
            expected: TOY_DIMS,
            got: episode.dims,
            context: format!("replay of {}", episode.episode_id),
        });
    }
    let mut state = spec.initial_state();
    let mut success = false;
    for t in 0..episode.len() {
        state = step(&state, episode.actions.row(t))?;
        success |= spec.success(&state);
    }
    Ok(ReplayResult {
        success,
        collision_free: !state.collision_latched,
        final_state: state,
    })
}

/// A controller that plans one action chunk at a time. Implemented by the
/// diffusion policy; tests use scripted stand-ins.
pub trait ChunkPolicy {
    fn chunk_len(&self) -> usize;

    /// Plan the next `chunk_len` actions (rows) from the current joint state
    /// and scene context. `seed`/`chunk_index` make stochastic planners
    /// reproducible.
    fn plan_chunk(
        &mut self,
        joint_state: &[f64],
        obs_features: &[f64],
        instruction: &str,
        seed: u64,
        chunk_index: usize,
    ) -> Result<Mat>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutOutcome {
    pub success: bool,
    pub collision_free: bool,
    pub a_ep: f64,
    pub j_ep: f64,
    pub steps: usize,
}

/// Closed-loop execution: sample a chunk, execute all of it, re-plan, until
/// `max_steps`. Smoothness is measured on the executed joint trace with the
/// dataset normalization stats, matching how demonstrations are scored.
pub fn rollout_policy(
    policy: &mut dyn ChunkPolicy,
    spec: &TaskSpec,
    stats: &NormalizationStats,
    seed: u64,
) -> Result<RolloutOutcome> {
    let obs = spec.obs_features();
    let mut state = spec.initial_state();
    let mut success = false;
    let mut trace: Vec<Vec<f64>> = Vec::with_capacity(spec.max_steps + 1);
    let mut steps = 0;
    let mut chunk_index = 0;
    while steps < spec.max_steps {
        let chunk = policy.plan_chunk(
            &state.joint_vector(),
            &obs,
            &spec.instruction,
            seed,
            chunk_index,
        )?;
        if chunk.cols() != TOY_DIMS {
            return Err(Error::DimMismatch {
                expected: TOY_DIMS,
                got: chunk.cols(),
                context: "policy chunk".into(),
            });
        }
        chunk_index += 1;
        for r in 0..chunk.rows() {
            if steps >= spec.max_steps {
                break;
            }
            trace.push(state.joint_vector());
            state = step(&state, chunk.row(r))?;
            success |= spec.success(&state);
            steps += 1;
        }
    }
    trace.push(state.joint_vector());

    let scores = trace_smoothness(&trace, stats)?;
    Ok(RolloutOutcome {
        success,
        collision_free: !state.collision_latched,
        a_ep: scores.a_ep,
        j_ep: scores.j_ep,
        steps,
    })
}

fn trace_smoothness(trace: &[Vec<f64>], stats: &NormalizationStats) -> Result<SmoothnessScores> {
    let states = Mat::from_rows(trace)?;
    let episode = Episode {
        episode_id: "rollout".into(),
        task_id: "rollout".into(),
        instruction: String::new(),
        dt: DEFAULT_DT,
        dims: states.cols(),
        source: Source::Simulated,
        actions: Mat::zeros(states.rows(), states.cols()),
        states,
    };
    metrics::episode_smoothness(&episode, stats)
}
