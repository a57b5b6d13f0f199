//! Deterministic instruction embedding: hash the string, expand to a fixed
//! pseudo-random unit vector. Stands in for a language encoder at desk
//! scale; injective on the toy task vocabulary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::util::fnv1a;

pub const INSTRUCTION_DIM: usize = 32;

pub fn instruction_embedding(instruction: &str) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(fnv1a(instruction.as_bytes()));
    let mut v: Vec<f64> = (0..INSTRUCTION_DIM)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    for x in &mut v {
        *x /= norm;
    }
    v
}
