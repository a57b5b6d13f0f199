//! Teleoperation-noise models applied to expert action streams, in the
//! fixed order delay -> drift -> jitter -> pauses (the goal redirect acts at
//! planning time). Each operator draws from its own derived RNG stream so
//! the output is a pure function of (spec, corruption, seed).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::episode::{Episode, Source, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::sim::expert::{expert_plan, ExpertPlan};
use crate::sim::task::TaskSpec;
use crate::sim::world::{step, TOY_DIMS};
use crate::util::derive_seed;

/// Pull factor of the tremor model: accumulated jitter offset is corrected
/// toward the intended path each step, bounding the excursion the way an
/// operator's own corrections do.
const JITTER_CORRECTION: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSpec {
    /// Per-dimension Gaussian tremor std (length 6; grip dims usually 0).
    pub jitter_std: Vec<f64>,
    /// Low-frequency sinusoidal drift amplitude (position units) and
    /// frequency (Hz) on the movement dims.
    pub drift_amp: f64,
    pub drift_freq: f64,
    /// Probability of inserting a stationary pause at each segment boundary,
    /// and its length in steps.
    pub pause_prob: f64,
    pub pause_len: usize,
    /// Command latency: the whole stream starts this many steps late.
    pub delay_steps: usize,
    /// Redirect the carry phase to the wrong goal.
    pub fail_goal: bool,
}

impl CorruptionSpec {
    pub fn none() -> Self {
        CorruptionSpec {
            jitter_std: vec![0.0; TOY_DIMS],
            drift_amp: 0.0,
            drift_freq: 0.0,
            pause_prob: 0.0,
            pause_len: 0,
            delay_steps: 0,
            fail_goal: false,
        }
    }

    pub fn is_none(&self) -> bool {
        self.jitter_std.iter().all(|&s| s == 0.0)
            && self.drift_amp == 0.0
            && self.pause_prob == 0.0
            && self.delay_steps == 0
            && !self.fail_goal
    }

    pub fn validate(&self) -> Result<()> {
        if self.jitter_std.len() != TOY_DIMS {
            return Err(Error::Config(format!(
                "jitter_std must list {} dims, got {}",
                TOY_DIMS,
                self.jitter_std.len()
            )));
        }
        let magnitudes_ok = self.jitter_std.iter().all(|&s| s >= 0.0)
            && self.drift_amp >= 0.0
            && self.drift_freq >= 0.0
            && (0.0..=1.0).contains(&self.pause_prob);
        if !magnitudes_ok {
            return Err(Error::Config("corruption magnitudes must be >= 0".into()));
        }
        Ok(())
    }
}

/// Generate one demonstration: scripted expert, corruption operators, then
/// an open-loop pass through the simulator to log exactly the states a
/// replay will reproduce.
pub fn generate_demo(
    spec: &TaskSpec,
    corruption: &CorruptionSpec,
    seed: u64,
    episode_id: &str,
    source: Source,
) -> Result<Episode> {
    corruption.validate()?;
    let plan = expert_plan(spec, corruption.fail_goal);
    let ExpertPlan {
        mut actions,
        mut boundaries,
    } = plan;

    // delay: the stream arrives late; initial grips hold
    if corruption.delay_steps > 0 {
        let first = actions.first().copied().unwrap_or([0.0; 6]);
        let hold = [0.0, 0.0, first[2], 0.0, 0.0, first[5]];
        for _ in 0..corruption.delay_steps {
            actions.insert(0, hold);
        }
        for b in &mut boundaries {
            *b += corruption.delay_steps;
        }
    }

    // drift: sinusoidal position offset, applied as per-step delta
    if corruption.drift_amp > 0.0 && corruption.drift_freq > 0.0 {
        let mut phase_rng =
            ChaCha20Rng::seed_from_u64(derive_seed(seed, "corruption-drift", 0));
        for dim in [0usize, 1, 3, 4] {
            let phi: f64 = phase_rng.gen_range(0.0..std::f64::consts::TAU);
            let offset = |t: f64| {
                corruption.drift_amp
                    * ((std::f64::consts::TAU * corruption.drift_freq * t * DEFAULT_DT + phi).sin()
                        - phi.sin())
            };
            for (t, row) in actions.iter_mut().enumerate() {
                row[dim] += offset(t as f64 + 1.0) - offset(t as f64);
            }
        }
    }

    // jitter: mean-reverting tremor around the intended path
    if corruption.jitter_std.iter().any(|&s| s > 0.0) {
        let mut jitter_rng =
            ChaCha20Rng::seed_from_u64(derive_seed(seed, "corruption-jitter", 0));
        for (dim, &std) in corruption.jitter_std.iter().enumerate() {
            if std == 0.0 {
                continue;
            }
            let normal = Normal::new(0.0, std).expect("validated std");
            let mut offset = 0.0;
            for row in actions.iter_mut() {
                let nudge = jitter_rng.sample(normal) - JITTER_CORRECTION * offset;
                row[dim] += nudge;
                offset += nudge;
            }
        }
    }

    // pauses: stationary holds at segment boundaries, where the minimum-jerk
    // profile is already at zero velocity, so moving segments stay clean
    if corruption.pause_prob > 0.0 && corruption.pause_len > 0 {
        let mut pause_rng =
            ChaCha20Rng::seed_from_u64(derive_seed(seed, "corruption-pause", 0));
        let mut inserted = 0;
        for &boundary in &boundaries {
            if pause_rng.gen_bool(corruption.pause_prob) {
                let at = boundary + inserted;
                let prev = actions[at.saturating_sub(1)];
                let hold = [0.0, 0.0, prev[2], 0.0, 0.0, prev[5]];
                for _ in 0..corruption.pause_len {
                    actions.insert(at, hold);
                }
                inserted += corruption.pause_len;
            }
        }
    }

    // open-loop pass: log the states replay will compute
    let mut state = spec.initial_state();
    let mut states = Vec::with_capacity(actions.len());
    for row in &actions {
        states.push(state.joint_vector());
        state = step(&state, row)?;
    }

    let episode = Episode {
        episode_id: episode_id.to_string(),
        task_id: spec.task_id.clone(),
        instruction: spec.instruction.clone(),
        dt: DEFAULT_DT,
        dims: TOY_DIMS,
        source,
        states: Mat::from_rows(&states)?,
        actions: Mat::from_rows(&actions.iter().map(|r| r.to_vec()).collect::<Vec<_>>())?,
    };
    episode.validate()?;
    Ok(episode)
}
