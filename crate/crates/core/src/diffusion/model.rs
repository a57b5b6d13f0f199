//! The diffusion-transformer noise predictor.
//!
//! Token layout per example: `[state | L noisy actions | timestep]` plus the
//! condition stream `[instruction | scene features]` concatenated into the
//! same window; learned positional embeddings; the L action-token outputs
//! map to the noise prediction.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::layers::{self, TransformerArch};
use crate::nn::tape::{NodeId, ParamSet, Tape};

/// Everything the policy is conditioned on for one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyInput {
    /// Current joint state, length `state_dim`.
    pub state: Vec<f64>,
    /// Scene feature vector, length `obs_dim`.
    pub obs: Vec<f64>,
    /// Instruction embedding, length `instr_dim`.
    pub instr: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDims {
    pub state_dim: usize,
    pub act_dim: usize,
    pub obs_dim: usize,
    pub instr_dim: usize,
    pub chunk_len: usize,
    pub diffusion_steps: usize,
}

impl PolicyDims {
    pub fn tokens(&self) -> usize {
        // state + L actions + timestep + instruction + scene
        self.chunk_len + 4
    }
}

/// Initialize all policy parameters for the given shapes.
pub fn init_policy_params(arch: &TransformerArch, dims: &PolicyDims, seed: u64) -> ParamSet {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    let h = arch.hidden;
    layers::init_linear(&mut params, "proj.state", dims.state_dim, h, &mut rng);
    layers::init_linear(&mut params, "proj.action", dims.act_dim, h, &mut rng);
    layers::init_linear(&mut params, "proj.instr", dims.instr_dim, h, &mut rng);
    layers::init_linear(&mut params, "proj.obs", dims.obs_dim, h, &mut rng);
    layers::init_embedding(&mut params, "embed.timestep", dims.diffusion_steps, h, &mut rng);
    layers::init_embedding(&mut params, "embed.pos", dims.tokens(), h, &mut rng);
    layers::init_trunk(&mut params, arch, &mut rng);
    layers::init_linear(&mut params, "head.noise", h, dims.act_dim, &mut rng);
    params
}

fn check_input(dims: &PolicyDims, input: &PolicyInput, noisy: &Mat, step_n: usize) -> Result<()> {
    if input.state.len() != dims.state_dim
        || input.obs.len() != dims.obs_dim
        || input.instr.len() != dims.instr_dim
    {
        return Err(Error::ShapeMismatch(format!(
            "policy input lengths (state {}, obs {}, instr {}) vs dims {:?}",
            input.state.len(),
            input.obs.len(),
            input.instr.len(),
            dims
        )));
    }
    if noisy.shape() != (dims.chunk_len, dims.act_dim) {
        return Err(Error::ShapeMismatch(format!(
            "noisy chunk {:?}, expected {}x{}",
            noisy.shape(),
            dims.chunk_len,
            dims.act_dim
        )));
    }
    if step_n == 0 || step_n > dims.diffusion_steps {
        return Err(Error::StepOutOfRange {
            got: step_n,
            max: dims.diffusion_steps,
        });
    }
    Ok(())
}

/// In-graph noise prediction; returns the L x act_dim output node.
pub fn noise_prediction_node(
    tape: &mut Tape,
    params: &ParamSet,
    arch: &TransformerArch,
    dims: &PolicyDims,
    input: &PolicyInput,
    noisy: NodeId,
    step_n: usize,
) -> NodeId {
    let state = tape.leaf(Mat::row_vector(&input.state));
    let state_tok = layers::linear(tape, params, state, "proj.state");
    let action_toks = layers::linear(tape, params, noisy, "proj.action");
    let t_table = tape.param(params.id("embed.timestep"));
    let t_tok = tape.embed_rows(t_table, &[step_n - 1]);
    let instr = tape.leaf(Mat::row_vector(&input.instr));
    let instr_tok = layers::linear(tape, params, instr, "proj.instr");
    let obs = tape.leaf(Mat::row_vector(&input.obs));
    let obs_tok = layers::linear(tape, params, obs, "proj.obs");

    let tokens = tape.concat_rows(&[state_tok, action_toks, t_tok, instr_tok, obs_tok]);
    let pos_table = tape.param(params.id("embed.pos"));
    let positions: Vec<usize> = (0..dims.tokens()).collect();
    let pos = tape.embed_rows(pos_table, &positions);
    let tokens = tape.add(tokens, pos);

    let hidden = layers::trunk(tape, params, tokens, arch);
    let action_out = tape.slice_rows(hidden, 1, 1 + dims.chunk_len);
    layers::linear(tape, params, action_out, "head.noise")
}

/// Standalone noise prediction (fresh tape, no gradients kept).
pub fn predict_noise(
    params: &ParamSet,
    arch: &TransformerArch,
    dims: &PolicyDims,
    input: &PolicyInput,
    noisy: &Mat,
    step_n: usize,
) -> Result<Mat> {
    check_input(dims, input, noisy, step_n)?;
    let mut tape = Tape::new(params);
    let noisy_node = tape.leaf(noisy.clone());
    let out = noise_prediction_node(&mut tape, params, arch, dims, input, noisy_node, step_n);
    tape.check_finite()?;
    Ok(tape.value(out).clone())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn tiny_dims() -> PolicyDims {
        PolicyDims {
            state_dim: 6,
            act_dim: 6,
            obs_dim: 12,
            instr_dim: 32,
            chunk_len: 8,
            diffusion_steps: 10,
        }
    }

    pub(crate) fn tiny_arch() -> TransformerArch {
        TransformerArch::new(1, 16, 2)
    }

    fn tiny_input(dims: &PolicyDims) -> PolicyInput {
        PolicyInput {
            state: (0..dims.state_dim).map(|i| i as f64 * 0.1).collect(),
            obs: (0..dims.obs_dim).map(|i| (i as f64 * 0.37).sin()).collect(),
            instr: (0..dims.instr_dim).map(|i| (i as f64 * 0.11).cos() * 0.2).collect(),
        }
    }

    #[test]
    fn output_shape_is_chunk_by_act_dim() {
        let (arch, dims) = (tiny_arch(), tiny_dims());
        let params = init_policy_params(&arch, &dims, 0);
        let input = tiny_input(&dims);
        let noisy = Mat::from_fn(dims.chunk_len, dims.act_dim, |i, j| ((i + j) as f64).sin());
        for n in [1, 5, 10] {
            let out = predict_noise(&params, &arch, &dims, &input, &noisy, n).unwrap();
            assert_eq!(out.shape(), (dims.chunk_len, dims.act_dim));
            assert!(out.all_finite());
        }
    }

    #[test]
    fn conditioning_is_live() {
        // permuting the condition values (instruction vs scene swap of
        // content) changes the output
        let (arch, dims) = (tiny_arch(), tiny_dims());
        let params = init_policy_params(&arch, &dims, 1);
        let input = tiny_input(&dims);
        let noisy = Mat::zeros(dims.chunk_len, dims.act_dim);
        let base = predict_noise(&params, &arch, &dims, &input, &noisy, 3).unwrap();

        let mut permuted = input.clone();
        permuted.obs.reverse();
        let swapped = predict_noise(&params, &arch, &dims, &permuted, &noisy, 3).unwrap();
        let delta: f64 = base
            .data()
            .iter()
            .zip(swapped.data())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(delta > 1e-9, "scene features must influence the output");

        let other_step = predict_noise(&params, &arch, &dims, &input, &noisy, 9).unwrap();
        let delta_t: f64 = base
            .data()
            .iter()
            .zip(other_step.data())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(delta_t > 1e-9, "timestep must influence the output");
    }

    #[test]
    fn zeroed_params_give_constant_zero_output() {
        let (arch, dims) = (tiny_arch(), tiny_dims());
        let mut params = init_policy_params(&arch, &dims, 2);
        for t in params.tensors_mut() {
            for x in t.data_mut() {
                *x = 0.0;
            }
        }
        let input = tiny_input(&dims);
        let noisy = Mat::from_fn(dims.chunk_len, dims.act_dim, |i, j| (i * j) as f64);
        let out = predict_noise(&params, &arch, &dims, &input, &noisy, 1).unwrap();
        assert!(out.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn shape_errors_are_reported() {
        let (arch, dims) = (tiny_arch(), tiny_dims());
        let params = init_policy_params(&arch, &dims, 3);
        let input = tiny_input(&dims);
        let bad = Mat::zeros(dims.chunk_len + 1, dims.act_dim);
        assert!(matches!(
            predict_noise(&params, &arch, &dims, &input, &bad, 1),
            Err(Error::ShapeMismatch(_))
        ));
        let good = Mat::zeros(dims.chunk_len, dims.act_dim);
        assert!(matches!(
            predict_noise(&params, &arch, &dims, &input, &good, 11),
            Err(Error::StepOutOfRange { .. })
        ));
    }
}
