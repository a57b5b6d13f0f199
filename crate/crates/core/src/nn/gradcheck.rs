//! Central finite-difference gradient verification.
//!
//! This is the independent oracle for every analytic gradient in the crate:
//! it only ever calls the forward evaluation, never `Tape::backward`.

use crate::mat::Mat;
use crate::nn::tape::{ParamGrads, ParamSet};

pub const GRADCHECK_H: f64 = 1e-5;
pub const GRADCHECK_TOL: f64 = 1e-4;

/// Worst relative error between analytic gradients and central differences
/// of `loss` over every parameter entry.
pub fn max_relative_error(
    params: &ParamSet,
    analytic: &ParamGrads,
    mut loss: impl FnMut(&ParamSet) -> f64,
) -> f64 {
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let (rows, cols) = params.tensors()[i].shape();
        for r in 0..rows {
            for c in 0..cols {
                let orig = probe.tensors()[i].get(r, c);
                probe.tensors_mut()[i].set(r, c, orig + GRADCHECK_H);
                let up = loss(&probe);
                probe.tensors_mut()[i].set(r, c, orig - GRADCHECK_H);
                let down = loss(&probe);
                probe.tensors_mut()[i].set(r, c, orig);
                let numeric = (up - down) / (2.0 * GRADCHECK_H);
                let a = grad_entry(analytic, i, r, c);
                let abs = (a - numeric).abs();
                if abs > 1e-9 {
                    worst = worst.max(abs / a.abs().max(numeric.abs()).max(1e-9));
                }
            }
        }
    }
    worst
}

fn grad_entry(grads: &ParamGrads, i: usize, r: usize, c: usize) -> f64 {
    grads.iter().nth(i).map(|m: &Mat| m.get(r, c)).unwrap_or(0.0)
}
