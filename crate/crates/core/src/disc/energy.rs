//! Denoising residual energy under the frozen pretrained policy, and its
//! z-scored negation: the log-pi proxy.
//!
//! One noise draw per (clip, diffusion step), seeded by hashing
//! (episode_id, start, step), so energies recompute bit-identically without
//! storing noise arrays.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffusion::model::PolicyInput;
use crate::diffusion::schedule::{forward_diffuse, NoiseSchedule};
use crate::diffusion::train::Policy;
use crate::disc::clip::Clip;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::util::{fnv1a, round_sig12};

/// Variance regularizer of the z-score.
pub const ZSCORE_EPS: f64 = 1e-8;

/// Default diffusion step subset used for energies.
pub const DEFAULT_STEP_SET: [usize; 3] = [10, 50, 90];

pub const LOGPI_SCHEMA: &str = "demoforge-logpi-v1";

fn noise_seed(episode_id: &str, start: usize, step: usize) -> u64 {
    let mut buf = Vec::with_capacity(episode_id.len() + 20);
    buf.extend_from_slice(episode_id.as_bytes());
    buf.push(b'|');
    buf.extend_from_slice(&(start as u64).to_le_bytes());
    buf.extend_from_slice(&(step as u64).to_le_bytes());
    fnv1a(&buf)
}

/// Mean squared denoising residual per chunk position, averaged over the
/// step set: `E = (1/(|S| L)) sum_s ||eps_hat - eps||^2`.
pub fn residual_energy(
    policy: &Policy,
    schedule: &NoiseSchedule,
    clip: &Clip,
    step_set: &[usize],
) -> Result<f64> {
    if step_set.is_empty() {
        return Err(Error::Config("energy step set must be nonempty".into()));
    }
    let l = policy.dims.chunk_len;
    let std_chunk = policy.normalizer.standardize(&clip.chunk);
    let input = PolicyInput {
        state: clip.state.clone(),
        obs: clip.obs.clone(),
        instr: clip.instr.clone(),
    };
    let mut total = 0.0;
    for &s in step_set {
        let mut rng =
            ChaCha20Rng::seed_from_u64(noise_seed(&clip.episode_id, clip.start, s));
        let noise = Mat::from_fn(l, policy.dims.act_dim, |_, _| rng.sample(StandardNormal));
        let noised = forward_diffuse(schedule, &std_chunk, s, &noise)?;
        let predicted = policy.predict(&input, &noised, s)?;
        total += predicted
            .data()
            .iter()
            .zip(noise.data())
            .map(|(p, e)| (p - e) * (p - e))
            .sum::<f64>();
    }
    Ok(total / (step_set.len() * l) as f64)
}

/// `logpi = -(E - mean(E)) / sqrt(var(E) + eps)` with population variance.
pub fn zscore_logpi(energies: &[f64]) -> Result<Vec<f64>> {
    if energies.len() < 2 {
        return Err(Error::SingleClip(energies.len()));
    }
    let n = energies.len() as f64;
    let mean = energies.iter().sum::<f64>() / n;
    let var = energies.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    let denom = (var + ZSCORE_EPS).sqrt();
    Ok(energies.iter().map(|e| -(e - mean) / denom).collect())
}

/// Persisted clip table: which windows were sampled per episode, their raw
/// energies and proxies. Later stages rebuild the exact same clips from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogpiTable {
    pub schema: String,
    pub step_set: Vec<usize>,
    pub entries: Vec<LogpiEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogpiEntry {
    pub episode_id: String,
    pub start: usize,
    pub energy: f64,
    pub logpi: f64,
}

impl LogpiTable {
    pub fn new(step_set: Vec<usize>, entries: Vec<LogpiEntry>) -> Self {
        LogpiTable {
            schema: LOGPI_SCHEMA.to_string(),
            step_set,
            entries,
        }
    }

    pub fn validate_schema(&self) -> Result<()> {
        if self.schema != LOGPI_SCHEMA {
            return Err(Error::SchemaMismatch {
                expected: LOGPI_SCHEMA.to_string(),
                found: self.schema.clone(),
            });
        }
        Ok(())
    }
}

/// Compute energies and proxies for a full clip set (dataset-wide z-score).
pub fn build_logpi_table(
    policy: &Policy,
    schedule: &NoiseSchedule,
    clips: &[Clip],
    step_set: &[usize],
) -> Result<LogpiTable> {
    let energies: Vec<f64> = clips
        .iter()
        .map(|c| residual_energy(policy, schedule, c, step_set))
        .collect::<Result<_>>()?;
    let proxies = zscore_logpi(&energies)?;
    let entries = clips
        .iter()
        .zip(energies.iter().zip(&proxies))
        .map(|(c, (&e, &p))| LogpiEntry {
            episode_id: c.episode_id.clone(),
            start: c.start,
            energy: round_sig12(e),
            logpi: round_sig12(p),
        })
        .collect();
    Ok(LogpiTable::new(step_set.to_vec(), entries))
}
