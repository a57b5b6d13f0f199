//! The quality discriminator: shallow transformer over
//! `[state | action chunk | logpi]` tokens with the condition stream
//! concatenated, globally averaged into a sigmoid head. Scores are clipped
//! to [0.1, 0.9] for stability.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::train::ActionNormalizer;
use crate::disc::clip::Clip;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::checkpoint::{Checkpoint, RngKind, RngState};
use crate::nn::layers::{self, TransformerArch};
use crate::nn::tape::{NodeId, ParamSet, Tape};
use crate::util::derive_seed;

pub const SCORE_MIN: f64 = 0.1;
pub const SCORE_MAX: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscDims {
    pub state_dim: usize,
    pub act_dim: usize,
    pub obs_dim: usize,
    pub instr_dim: usize,
    pub chunk_len: usize,
}

impl DiscDims {
    pub fn tokens(&self) -> usize {
        // state + L actions + logpi + instruction + scene
        self.chunk_len + 4
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub arch: TransformerArch,
    pub dims: DiscDims,
    pub params: ParamSet,
    /// Same action transform as the frozen policy, so both models see the
    /// chunks on one scale.
    pub normalizer: ActionNormalizer,
    pub train_seed: u64,
}

pub fn init_disc_params(arch: &TransformerArch, dims: &DiscDims, seed: u64) -> ParamSet {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    let h = arch.hidden;
    layers::init_linear(&mut params, "proj.state", dims.state_dim, h, &mut rng);
    layers::init_linear(&mut params, "proj.action", dims.act_dim, h, &mut rng);
    layers::init_linear(&mut params, "proj.logpi", 1, h, &mut rng);
    layers::init_linear(&mut params, "proj.instr", dims.instr_dim, h, &mut rng);
    layers::init_linear(&mut params, "proj.obs", dims.obs_dim, h, &mut rng);
    layers::init_embedding(&mut params, "embed.pos", dims.tokens(), h, &mut rng);
    layers::init_trunk(&mut params, arch, &mut rng);
    layers::init_linear(&mut params, "head.fc1", h, h, &mut rng);
    layers::init_linear(&mut params, "head.fc2", h, 1, &mut rng);
    params
}

impl Discriminator {
    pub fn init(
        arch: TransformerArch,
        dims: DiscDims,
        normalizer: ActionNormalizer,
        seed: u64,
    ) -> Discriminator {
        Discriminator {
            arch,
            dims,
            params: init_disc_params(&arch, &dims, derive_seed(seed, "disc-init", 0)),
            normalizer,
            train_seed: seed,
        }
    }

    /// Clipped quality score of one clip (fresh tape).
    pub fn score_clip(&self, clip: &Clip) -> Result<f64> {
        let mut tape = Tape::new(&self.params);
        let node = score_node(&mut tape, &self.params, &self.arch, &self.dims, &self.normalizer, clip)?;
        tape.check_finite()?;
        Ok(tape.scalar(node))
    }

    pub fn to_checkpoint(&self, opt: Option<crate::nn::adamw::OptimizerState>) -> Checkpoint {
        Checkpoint {
            arch: serde_json::json!({
                "kind": "discriminator",
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

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Discriminator> {
        let arch: TransformerArch = serde_json::from_value(ckpt.arch["arch"].clone())
            .map_err(|e| Error::Config(format!("checkpoint arch: {e}")))?;
        let dims: DiscDims = serde_json::from_value(ckpt.arch["dims"].clone())
            .map_err(|e| Error::Config(format!("checkpoint dims: {e}")))?;
        let normalizer: ActionNormalizer =
            serde_json::from_value(ckpt.aux["action_norm"].clone())
                .map_err(|e| Error::Config(format!("checkpoint action_norm: {e}")))?;
        Ok(Discriminator {
            arch,
            dims,
            params: ckpt.params.clone(),
            normalizer,
            train_seed: ckpt.rng.train_seed,
        })
    }
}

/// In-graph score: sigmoid head clipped to [`SCORE_MIN`], [`SCORE_MAX`].
pub fn score_node(
    tape: &mut Tape,
    params: &ParamSet,
    arch: &TransformerArch,
    dims: &DiscDims,
    normalizer: &ActionNormalizer,
    clip: &Clip,
) -> Result<NodeId> {
    if clip.state.len() != dims.state_dim
        || clip.obs.len() != dims.obs_dim
        || clip.instr.len() != dims.instr_dim
        || clip.chunk.shape() != (dims.chunk_len, dims.act_dim)
    {
        return Err(Error::ShapeMismatch(format!(
            "clip {}@{} does not fit discriminator dims {:?}",
            clip.episode_id, clip.start, dims
        )));
    }
    let logpi = clip.logpi_proxy.ok_or_else(|| {
        Error::Config(format!(
            "clip {}@{} has no log-pi proxy; run compute-logpi first",
            clip.episode_id, clip.start
        ))
    })?;

    let state = tape.leaf(Mat::row_vector(&clip.state));
    let state_tok = layers::linear(tape, params, state, "proj.state");
    let actions = tape.leaf(normalizer.standardize(&clip.chunk));
    let action_toks = layers::linear(tape, params, actions, "proj.action");
    let logpi_leaf = tape.leaf(Mat::row_vector(&[logpi]));
    let logpi_tok = layers::linear(tape, params, logpi_leaf, "proj.logpi");
    let instr = tape.leaf(Mat::row_vector(&clip.instr));
    let instr_tok = layers::linear(tape, params, instr, "proj.instr");
    let obs = tape.leaf(Mat::row_vector(&clip.obs));
    let obs_tok = layers::linear(tape, params, obs, "proj.obs");

    let tokens = tape.concat_rows(&[state_tok, action_toks, logpi_tok, instr_tok, obs_tok]);
    let pos_table = tape.param(params.id("embed.pos"));
    let positions: Vec<usize> = (0..dims.tokens()).collect();
    let pos = tape.embed_rows(pos_table, &positions);
    let tokens = tape.add(tokens, pos);

    let hidden = layers::trunk(tape, params, tokens, arch);
    let pooled = tape.mean_rows(hidden);
    let h = layers::linear(tape, params, pooled, "head.fc1");
    let h = tape.gelu(h);
    let logit = layers::linear(tape, params, h, "head.fc2");
    let raw = tape.sigmoid(logit);
    Ok(tape.clamp(raw, SCORE_MIN, SCORE_MAX))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn tiny_disc_dims() -> DiscDims {
        DiscDims {
            state_dim: 6,
            act_dim: 6,
            obs_dim: 12,
            instr_dim: 32,
            chunk_len: 8,
        }
    }

    pub(crate) fn toy_clip(dims: &DiscDims, logpi: Option<f64>, phase: f64) -> Clip {
        Clip {
            episode_id: "ep".into(),
            start: 0,
            state: (0..dims.state_dim).map(|i| (i as f64 + phase).sin()).collect(),
            chunk: Mat::from_fn(dims.chunk_len, dims.act_dim, |i, j| {
                ((i * 7 + j) as f64 * 0.13 + phase).cos() * 0.03
            }),
            obs: (0..dims.obs_dim).map(|i| (i as f64 * 0.31 + phase).cos()).collect(),
            instr: (0..dims.instr_dim).map(|i| (i as f64 * 0.17).sin() * 0.2).collect(),
            logpi_proxy: logpi,
        }
    }

    fn unit_norm(dims: &DiscDims) -> ActionNormalizer {
        ActionNormalizer {
            mean: vec![0.0; dims.act_dim],
            std: vec![1.0; dims.act_dim],
        }
    }

    #[test]
    fn scores_are_clipped_and_deterministic() {
        let dims = tiny_disc_dims();
        let arch = TransformerArch::new(1, 16, 2);
        let disc = Discriminator::init(arch, dims, unit_norm(&dims), 0);
        let clip = toy_clip(&dims, Some(0.5), 0.0);
        let a = disc.score_clip(&clip).unwrap();
        let b = disc.score_clip(&clip).unwrap();
        assert_eq!(a, b);
        assert!((SCORE_MIN..=SCORE_MAX).contains(&a));
    }

    #[test]
    fn saturated_head_clamps_to_bounds() {
        let dims = tiny_disc_dims();
        let arch = TransformerArch::new(1, 16, 2);
        let mut disc = Discriminator::init(arch, dims, unit_norm(&dims), 1);
        let clip = toy_clip(&dims, Some(0.0), 0.3);
        // push the head bias far positive: raw sigmoid ~ 1 -> stored 0.9
        let bias = disc.params.id("head.fc2.b");
        disc.params.get_mut(bias).set(0, 0, 50.0);
        assert_eq!(disc.score_clip(&clip).unwrap(), SCORE_MAX);
        disc.params.get_mut(bias).set(0, 0, -50.0);
        assert_eq!(disc.score_clip(&clip).unwrap(), SCORE_MIN);
    }

    #[test]
    fn interior_scores_pass_through() {
        let dims = tiny_disc_dims();
        let arch = TransformerArch::new(1, 16, 2);
        let mut disc = Discriminator::init(arch, dims, unit_norm(&dims), 2);
        // zero all params: logit 0 -> sigmoid 0.5 -> inside the clip range
        for t in disc.params.tensors_mut() {
            for x in t.data_mut() {
                *x = 0.0;
            }
        }
        let clip = toy_clip(&dims, Some(1.0), 0.7);
        assert_eq!(disc.score_clip(&clip).unwrap(), 0.5);
    }

    #[test]
    fn missing_logpi_is_an_error() {
        let dims = tiny_disc_dims();
        let arch = TransformerArch::new(1, 16, 2);
        let disc = Discriminator::init(arch, dims, unit_norm(&dims), 3);
        let clip = toy_clip(&dims, None, 0.0);
        assert!(disc.score_clip(&clip).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dims = tiny_disc_dims();
        let arch = TransformerArch::new(2, 16, 4);
        let disc = Discriminator::init(arch, dims, unit_norm(&dims), 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("disc.ckpt");
        crate::nn::checkpoint::save_checkpoint(&path, &disc.to_checkpoint(None)).unwrap();
        let back =
            Discriminator::from_checkpoint(&crate::nn::checkpoint::load_checkpoint(&path).unwrap())
                .unwrap();
        assert_eq!(back, disc);
    }
}
