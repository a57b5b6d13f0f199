//! Policy training: standardization, the weighted denoising loss, and the
//! pretrain/post-train loops.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffusion::embed::instruction_embedding;
use crate::diffusion::model::{init_policy_params, noise_prediction_node, PolicyDims, PolicyInput};
use crate::diffusion::schedule::{forward_diffuse, NoiseSchedule};
use crate::episode::Episode;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::adamw::{adamw_step, AdamWConfig, OptimizerState};
use crate::nn::checkpoint::{Checkpoint, RngKind, RngState};
use crate::nn::layers::TransformerArch;
use crate::nn::tape::{ParamGrads, ParamSet, Tape};
use crate::sim::task::TaskSpec;
use crate::util::derive_seed;

/// Std floor keeps constant action dimensions well-conditioned.
const STD_FLOOR: f64 = 1e-3;

/// Per-dimension z-score transform fitted on the training actions; applied
/// before diffusion, inverted after sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ActionNormalizer {
    pub fn fit<'a>(episodes: impl Iterator<Item = &'a Episode>) -> Result<Self> {
        let mut count = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sum_sq: Vec<f64> = Vec::new();
        for ep in episodes {
            if sum.is_empty() {
                sum = vec![0.0; ep.dims];
                sum_sq = vec![0.0; ep.dims];
            }
            if ep.dims != sum.len() {
                return Err(Error::DimMismatch {
                    expected: sum.len(),
                    got: ep.dims,
                    context: format!("action normalizer, episode {}", ep.episode_id),
                });
            }
            for t in 0..ep.len() {
                for (k, &a) in ep.actions.row(t).iter().enumerate() {
                    sum[k] += a;
                    sum_sq[k] += a * a;
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::EmptyDataset("action normalizer".into()));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std: Vec<f64> = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| ((sq / n - m * m).max(0.0)).sqrt().max(STD_FLOOR))
            .collect();
        Ok(ActionNormalizer { mean, std })
    }

    pub fn standardize(&self, chunk: &Mat) -> Mat {
        Mat::from_fn(chunk.rows(), chunk.cols(), |i, j| {
            (chunk.get(i, j) - self.mean[j]) / self.std[j]
        })
    }

    pub fn unstandardize(&self, chunk: &Mat) -> Mat {
        Mat::from_fn(chunk.rows(), chunk.cols(), |i, j| {
            chunk.get(i, j) * self.std[j] + self.mean[j]
        })
    }
}

/// The policy: trunk shape, token dims, parameters, action transform, and
/// the seed its training randomness derives from.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub arch: TransformerArch,
    pub dims: PolicyDims,
    pub params: ParamSet,
    pub normalizer: ActionNormalizer,
    pub train_seed: u64,
}

impl Policy {
    pub fn init(
        arch: TransformerArch,
        dims: PolicyDims,
        normalizer: ActionNormalizer,
        seed: u64,
    ) -> Policy {
        Policy {
            arch,
            dims,
            params: init_policy_params(&arch, &dims, derive_seed(seed, "policy-init", 0)),
            normalizer,
            train_seed: seed,
        }
    }

    pub fn predict(&self, input: &PolicyInput, noisy: &Mat, step_n: usize) -> Result<Mat> {
        crate::diffusion::model::predict_noise(
            &self.params,
            &self.arch,
            &self.dims,
            input,
            noisy,
            step_n,
        )
    }

    pub fn to_checkpoint(&self, opt: Option<OptimizerState>) -> Checkpoint {
        Checkpoint {
            arch: serde_json::json!({
                "kind": "policy",
                "arch": self.arch,
                "dims": self.dims,
            }),
            params: self.params.clone(),
            opt,
            rng: RngState {
                kind: RngKind::DerivedChacha20,
                train_seed: self.train_seed,
            },
            aux: serde_json::json!({ "action_norm": self.normalizer }),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Policy> {
        let arch: TransformerArch = serde_json::from_value(ckpt.arch["arch"].clone())
            .map_err(|e| Error::Config(format!("checkpoint arch: {e}")))?;
        let dims: PolicyDims = serde_json::from_value(ckpt.arch["dims"].clone())
            .map_err(|e| Error::Config(format!("checkpoint dims: {e}")))?;
        let normalizer: ActionNormalizer =
            serde_json::from_value(ckpt.aux["action_norm"].clone())
                .map_err(|e| Error::Config(format!("checkpoint action_norm: {e}")))?;
        Ok(Policy {
            arch,
            dims,
            params: ckpt.params.clone(),
            normalizer,
            train_seed: ckpt.rng.train_seed,
        })
    }
}

/// One training chunk: conditioning, standardized actions, quality weight.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub input: PolicyInput,
    pub chunk: Mat,
    pub weight: f64,
}

/// `sum_i w_i r_i / sum_i w_i` (0 when all weights vanish).
pub fn combine_weighted(residuals: &[f64], weights: &[f64]) -> f64 {
    let sum_w: f64 = weights.iter().sum();
    if sum_w == 0.0 {
        return 0.0;
    }
    residuals
        .iter()
        .zip(weights)
        .map(|(r, w)| r * w)
        .sum::<f64>()
        / sum_w
}

/// Weighted denoising loss over a batch; per-example diffusion step and
/// noise come from `rng`. Returns the scalar loss and, when `with_grads`,
/// the parameter gradients of the normalized objective.
pub fn weighted_loss(
    params: &ParamSet,
    arch: &TransformerArch,
    dims: &PolicyDims,
    schedule: &NoiseSchedule,
    batch: &[TrainItem],
    rng: &mut ChaCha20Rng,
    with_grads: bool,
) -> Result<(f64, Option<ParamGrads>)> {
    for item in batch {
        if item.weight < 0.0 {
            return Err(Error::NegativeWeight(item.weight));
        }
    }
    let sum_w: f64 = batch.iter().map(|b| b.weight).sum();
    let mut grads = with_grads.then(|| ParamGrads::zeros(params));
    let mut residuals = Vec::with_capacity(batch.len());
    let mut weights = Vec::with_capacity(batch.len());
    for item in batch {
        let n = rng.gen_range(1..=schedule.len());
        let noise = Mat::from_fn(dims.chunk_len, dims.act_dim, |_, _| {
            rng.sample(StandardNormal)
        });
        let noisy = forward_diffuse(schedule, &item.chunk, n, &noise)?;

        let mut tape = Tape::new(params);
        let noisy_node = tape.leaf(noisy);
        let pred = noise_prediction_node(&mut tape, params, arch, dims, &item.input, noisy_node, n);
        let target = tape.leaf(noise);
        let diff = tape.sub(pred, target);
        let sq = tape.mul(diff, diff);
        let residual = tape.sum_all(sq);
        tape.check_finite()?;
        residuals.push(tape.scalar(residual));
        weights.push(item.weight);

        if let Some(total) = grads.as_mut() {
            if sum_w > 0.0 && item.weight > 0.0 {
                let g = tape.backward(residual, item.weight / sum_w)?;
                total.add_assign(&g);
            }
        }
    }
    Ok((combine_weighted(&residuals, &weights), grads))
}

/// An episode prepared for chunk sampling: precomputed conditioning and the
/// per-clip training weights (empty when unweighted).
#[derive(Debug, Clone)]
pub struct PreparedEpisode {
    pub episode: Episode,
    pub obs: Vec<f64>,
    pub instr: Vec<f64>,
    pub clip_weights: Vec<(usize, f64)>,
}

/// Chunk sampler over a set of episodes.
#[derive(Debug, Clone)]
pub struct ChunkSource {
    pub episodes: Vec<PreparedEpisode>,
}

impl ChunkSource {
    /// Precompute scene features and instruction embeddings. `weights`, when
    /// given, maps episode id to its scored clip weights.
    pub fn prepare(
        episodes: Vec<Episode>,
        weights: Option<&BTreeMap<String, Vec<(usize, f64)>>>,
        chunk_len: usize,
    ) -> Result<ChunkSource> {
        if episodes.is_empty() {
            return Err(Error::EmptyDataset("training chunk source".into()));
        }
        let mut prepared = Vec::with_capacity(episodes.len());
        for episode in episodes {
            if episode.len() < chunk_len {
                return Err(Error::ChunkLongerThanEpisode {
                    chunk: chunk_len,
                    episode: episode.len(),
                });
            }
            let spec = TaskSpec::parse_task_id(&episode.task_id)?;
            let clip_weights = match weights {
                Some(map) => map
                    .get(&episode.episode_id)
                    .cloned()
                    .ok_or_else(|| Error::MissingWeights(episode.episode_id.clone()))?,
                None => Vec::new(),
            };
            prepared.push(PreparedEpisode {
                obs: spec.obs_features(),
                instr: instruction_embedding(&episode.instruction),
                episode,
                clip_weights,
            });
        }
        Ok(ChunkSource { episodes: prepared })
    }

    /// Weight of the scored clip nearest to `start` (ties to the earlier
    /// clip).
    fn nearest_weight(clip_weights: &[(usize, f64)], start: usize) -> f64 {
        clip_weights
            .iter()
            .min_by(|(sa, _), (sb, _)| {
                let da = sa.abs_diff(start);
                let db = sb.abs_diff(start);
                da.cmp(&db).then(sa.cmp(sb))
            })
            .map(|&(_, w)| w)
            .unwrap_or(1.0)
    }

    /// Draw one training chunk. `weight_ramp` linearly blends weights in
    /// from uniform: effective = 1 + (w - 1) * ramp.
    pub fn sample_item(
        &self,
        rng: &mut ChaCha20Rng,
        chunk_len: usize,
        normalizer: &ActionNormalizer,
        weighted: bool,
        weight_ramp: f64,
    ) -> Result<TrainItem> {
        let ep = &self.episodes[rng.gen_range(0..self.episodes.len())];
        let start = rng.gen_range(0..=ep.episode.len() - chunk_len);
        let chunk = ep.episode.actions.slice_rows(start, start + chunk_len);
        let weight = if weighted {
            if ep.clip_weights.is_empty() {
                return Err(Error::MissingWeights(ep.episode.episode_id.clone()));
            }
            let w = Self::nearest_weight(&ep.clip_weights, start);
            1.0 + (w - 1.0) * weight_ramp.clamp(0.0, 1.0)
        } else {
            1.0
        };
        Ok(TrainItem {
            input: PolicyInput {
                state: ep.episode.states.row(start).to_vec(),
                obs: ep.obs.clone(),
                instr: ep.instr.clone(),
            },
            chunk: normalizer.standardize(&chunk),
            weight,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    /// Quality-weight warm-up length for post-training; 0 disables ramping.
    pub warmup_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: usize,
    pub loss: f64,
}

/// Run `cfg.steps` optimization steps starting at global step `start_step`
/// (which seeds each step's RNG, so a reloaded checkpoint continues with an
/// identical trajectory).
pub fn train_policy(
    policy: &mut Policy,
    opt_state: &mut OptimizerState,
    schedule: &NoiseSchedule,
    source: &ChunkSource,
    cfg: &PolicyTrainConfig,
    weighted: bool,
    start_step: usize,
) -> Result<Vec<LossPoint>> {
    let mut curve = Vec::with_capacity(cfg.steps);
    for i in 0..cfg.steps {
        let step = start_step + i;
        let mut rng =
            ChaCha20Rng::seed_from_u64(derive_seed(policy.train_seed, "train-step", step as u64));
        let ramp = if !weighted {
            0.0
        } else if cfg.warmup_steps == 0 {
            1.0
        } else {
            (step as f64 / cfg.warmup_steps as f64).min(1.0)
        };
        let batch: Vec<TrainItem> = (0..cfg.batch_size)
            .map(|_| {
                source.sample_item(&mut rng, policy.dims.chunk_len, &policy.normalizer, weighted, ramp)
            })
            .collect::<Result<_>>()?;
        let (loss, grads) = weighted_loss(
            &policy.params,
            &policy.arch,
            &policy.dims,
            schedule,
            &batch,
            &mut rng,
            true,
        )?;
        adamw_step(
            &mut policy.params,
            &grads.expect("gradients requested"),
            &cfg.optimizer,
            opt_state,
        )?;
        curve.push(LossPoint { step, loss });
    }
    Ok(curve)
}
