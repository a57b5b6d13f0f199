//! DDPM ancestral sampling and the chunk-policy adapter for rollouts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::diffusion::embed::instruction_embedding;
use crate::diffusion::model::PolicyInput;
use crate::diffusion::schedule::NoiseSchedule;
use crate::diffusion::train::Policy;
use crate::error::Result;
use crate::mat::Mat;
use crate::sim::rollout::ChunkPolicy;
use crate::util::derive_seed;

/// Sample one action chunk by running the full reverse process from
/// Gaussian noise. Deterministic given `seed`; returns raw (inverse
/// standardized) actions.
pub fn sample_chunk(
    policy: &Policy,
    schedule: &NoiseSchedule,
    input: &PolicyInput,
    seed: u64,
) -> Result<Mat> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (l, d) = (policy.dims.chunk_len, policy.dims.act_dim);
    let mut x = Mat::from_fn(l, d, |_, _| rng.sample(StandardNormal));
    for n in (1..=schedule.len()).rev() {
        let predicted = policy.predict(input, &x, n)?;
        let abar = schedule.alpha_bar(n)?;
        let alpha = schedule.alphas[n - 1];
        let beta = schedule.betas[n - 1];
        let coeff = beta / (1.0 - abar).sqrt();
        let inv_sqrt_alpha = 1.0 / alpha.sqrt();
        for (xv, &ev) in x.data_mut().iter_mut().zip(predicted.data()) {
            *xv = inv_sqrt_alpha * (*xv - coeff * ev);
        }
        if n > 1 {
            let sigma = schedule.posterior_variance(n)?.sqrt();
            for xv in x.data_mut() {
                *xv += sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    Ok(policy.normalizer.unstandardize(&x))
}

/// Rollout adapter: re-plans a fresh chunk every `chunk_len` steps.
pub struct PolicyController {
    pub policy: Policy,
    pub schedule: NoiseSchedule,
}

impl ChunkPolicy for PolicyController {
    fn chunk_len(&self) -> usize {
        self.policy.dims.chunk_len
    }

    fn plan_chunk(
        &mut self,
        joint_state: &[f64],
        obs_features: &[f64],
        instruction: &str,
        seed: u64,
        chunk_index: usize,
    ) -> Result<Mat> {
        let input = PolicyInput {
            state: joint_state.to_vec(),
            obs: obs_features.to_vec(),
            instr: instruction_embedding(instruction),
        };
        sample_chunk(
            &self.policy,
            &self.schedule,
            &input,
            derive_seed(seed, "chunk", chunk_index as u64),
        )
    }
}
