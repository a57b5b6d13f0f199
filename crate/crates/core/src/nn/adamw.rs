//! AdamW with decoupled weight decay and bias-corrected moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::tape::{ParamGrads, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// First/second moment accumulators, aligned index-for-index with the
/// parameter set they were created from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<Mat>,
    pub v: Vec<Mat>,
    pub step: u64,
}

impl OptimizerState {
    pub fn zeros(params: &ParamSet) -> Self {
        let shaped: Vec<Mat> = params
            .tensors()
            .iter()
            .map(|t| Mat::zeros(t.rows(), t.cols()))
            .collect();
        OptimizerState {
            m: shaped.clone(),
            v: shaped,
            step: 0,
        }
    }
}

pub fn adamw_step(
    params: &mut ParamSet,
    grads: &ParamGrads,
    cfg: &AdamWConfig,
    state: &mut OptimizerState,
) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::ShapeMismatch(format!(
            "optimizer state holds {} tensors, parameters hold {}",
            state.m.len(),
            params.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (i, (g, p)) in grads.iter().zip(params.tensors_mut()).enumerate() {
        if g.shape() != p.shape() {
            return Err(Error::ShapeMismatch(format!(
                "gradient {i} shape {:?} vs parameter {:?}",
                g.shape(),
                p.shape()
            )));
        }
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (((pv, &gv), mv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * gv;
            *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * gv * gv;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *pv -= cfg.lr * (m_hat / (v_hat.sqrt() + cfg.eps)) + cfg.lr * cfg.weight_decay * *pv;
        }
    }
    Ok(())
}
