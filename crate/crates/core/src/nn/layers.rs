//! Parameter initialization and transformer building blocks.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::mat::Mat;
use crate::nn::tape::{NodeId, ParamSet, Tape};

/// Trunk shape shared by the policy and the discriminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformerArch {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
}

impl TransformerArch {
    pub const fn new(layers: usize, hidden: usize, heads: usize) -> Self {
        TransformerArch {
            layers,
            hidden,
            heads,
            mlp_ratio: 3,
        }
    }
}

/// Named architecture presets. `*-paper` presets exist for the parameter
/// count audit and are never trained here.
pub fn arch_preset(name: &str) -> Option<TransformerArch> {
    Some(match name {
        "policy-tiny" => TransformerArch::new(2, 64, 4),
        "policy-desk" => TransformerArch::new(4, 128, 4),
        "policy-paper" => TransformerArch::new(28, 1024, 16),
        "disc-desk" => TransformerArch::new(2, 64, 4),
        "disc-paper" => TransformerArch::new(12, 512, 8),
        _ => return None,
    })
}

/// Weights: truncated normal, std 0.02, resampled outside two standard
/// deviations. Biases zero, norm gains one.
pub const INIT_STD: f64 = 0.02;

pub fn trunc_normal(rng: &mut ChaCha20Rng, rows: usize, cols: usize, std: f64) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for x in m.data_mut() {
        *x = loop {
            let z: f64 = rng.sample(StandardNormal);
            if z.abs() <= 2.0 {
                break z * std;
            }
        };
    }
    m
}

pub fn init_linear(
    params: &mut ParamSet,
    name: &str,
    fan_in: usize,
    fan_out: usize,
    rng: &mut ChaCha20Rng,
) {
    params.insert(format!("{name}.w"), trunc_normal(rng, fan_in, fan_out, INIT_STD));
    params.insert(format!("{name}.b"), Mat::zeros(1, fan_out));
}

pub fn init_layer_norm(params: &mut ParamSet, name: &str, dim: usize) {
    params.insert(format!("{name}.g"), Mat::from_fn(1, dim, |_, _| 1.0));
    params.insert(format!("{name}.b"), Mat::zeros(1, dim));
}

pub fn init_embedding(
    params: &mut ParamSet,
    name: &str,
    rows: usize,
    cols: usize,
    rng: &mut ChaCha20Rng,
) {
    params.insert(name.to_string(), trunc_normal(rng, rows, cols, INIT_STD));
}

pub fn init_transformer_block(
    params: &mut ParamSet,
    prefix: &str,
    arch: &TransformerArch,
    rng: &mut ChaCha20Rng,
) {
    let h = arch.hidden;
    init_layer_norm(params, &format!("{prefix}.ln1"), h);
    init_linear(params, &format!("{prefix}.attn.q"), h, h, rng);
    init_linear(params, &format!("{prefix}.attn.k"), h, h, rng);
    init_linear(params, &format!("{prefix}.attn.v"), h, h, rng);
    init_linear(params, &format!("{prefix}.attn.o"), h, h, rng);
    init_layer_norm(params, &format!("{prefix}.ln2"), h);
    init_linear(params, &format!("{prefix}.mlp.fc1"), h, h * arch.mlp_ratio, rng);
    init_linear(params, &format!("{prefix}.mlp.fc2"), h * arch.mlp_ratio, h, rng);
}

pub fn init_trunk(params: &mut ParamSet, arch: &TransformerArch, rng: &mut ChaCha20Rng) {
    for layer in 0..arch.layers {
        init_transformer_block(params, &format!("block{layer}"), arch, rng);
    }
    init_layer_norm(params, "final_ln", arch.hidden);
}

/// `x @ W + b`.
pub fn linear(tape: &mut Tape, params: &ParamSet, x: NodeId, name: &str) -> NodeId {
    let w = tape.param(params.id(&format!("{name}.w")));
    let b = tape.param(params.id(&format!("{name}.b")));
    let y = tape.matmul(x, w);
    tape.add_row(y, b)
}

pub fn layer_norm(tape: &mut Tape, params: &ParamSet, x: NodeId, name: &str) -> NodeId {
    let g = tape.param(params.id(&format!("{name}.g")));
    let b = tape.param(params.id(&format!("{name}.b")));
    tape.layer_norm(x, g, b)
}

/// Pre-norm transformer block: attention and MLP sublayers with residual
/// connections, full (non-causal) attention over the token window.
pub fn transformer_block(
    tape: &mut Tape,
    params: &ParamSet,
    x: NodeId,
    prefix: &str,
    arch: &TransformerArch,
) -> NodeId {
    let normed = layer_norm(tape, params, x, &format!("{prefix}.ln1"));
    let q = linear(tape, params, normed, &format!("{prefix}.attn.q"));
    let k = linear(tape, params, normed, &format!("{prefix}.attn.k"));
    let v = linear(tape, params, normed, &format!("{prefix}.attn.v"));
    let attn = tape.attention(q, k, v, arch.heads);
    let proj = linear(tape, params, attn, &format!("{prefix}.attn.o"));
    let x = tape.add(x, proj);

    let normed = layer_norm(tape, params, x, &format!("{prefix}.ln2"));
    let h = linear(tape, params, normed, &format!("{prefix}.mlp.fc1"));
    let h = tape.gelu(h);
    let h = linear(tape, params, h, &format!("{prefix}.mlp.fc2"));
    tape.add(x, h)
}

pub fn trunk(
    tape: &mut Tape,
    params: &ParamSet,
    mut x: NodeId,
    arch: &TransformerArch,
) -> NodeId {
    for layer in 0..arch.layers {
        x = transformer_block(tape, params, x, &format!("block{layer}"), arch);
    }
    layer_norm(tape, params, x, "final_ln")
}
