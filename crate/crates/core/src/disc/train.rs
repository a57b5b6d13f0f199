//! Positive-unlabeled training of the discriminator.
//!
//! Positives are clips from replay-validated high-quality episodes; the
//! unlabeled pool is everything else, treated as soft negatives:
//! `L_D = eta * mean_pos(-log d) + mean_unl(-log(1 - d))` with eta = 0.5,
//! on scores clipped to [0.1, 0.9].

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::train::LossPoint;
use crate::disc::clip::Clip;
use crate::disc::model::{score_node, Discriminator};
use crate::error::{Error, Result};
use crate::nn::adamw::{adamw_step, AdamWConfig, OptimizerState};
use crate::nn::tape::{NodeId, ParamGrads, Tape};
use crate::util::derive_seed;

pub const PU_ETA: f64 = 0.5;

/// Scalar PU objective over already-clipped scores.
pub fn pu_loss(positive_scores: &[f64], unlabeled_scores: &[f64], eta: f64) -> Result<f64> {
    if positive_scores.is_empty() {
        return Err(Error::EmptyBatchSide("positive"));
    }
    if unlabeled_scores.is_empty() {
        return Err(Error::EmptyBatchSide("unlabeled"));
    }
    let pos = positive_scores.iter().map(|d| -d.ln()).sum::<f64>() / positive_scores.len() as f64;
    let unl = unlabeled_scores
        .iter()
        .map(|d| -(1.0 - d).ln())
        .sum::<f64>()
        / unlabeled_scores.len() as f64;
    Ok(eta * pos + unl)
}

/// Build the PU loss in-graph for one balanced batch and return the loss
/// node (positively and unlabeled sides each mean-reduced).
fn pu_loss_node(
    tape: &mut Tape,
    disc: &Discriminator,
    positives: &[&Clip],
    unlabeled: &[&Clip],
    eta: f64,
) -> Result<NodeId> {
    if positives.is_empty() {
        return Err(Error::EmptyBatchSide("positive"));
    }
    if unlabeled.is_empty() {
        return Err(Error::EmptyBatchSide("unlabeled"));
    }
    let mut terms: Vec<NodeId> = Vec::with_capacity(2);
    let mut pos_logs = Vec::with_capacity(positives.len());
    for clip in positives {
        let d = score_node(tape, &disc.params, &disc.arch, &disc.dims, &disc.normalizer, clip)?;
        pos_logs.push(tape.log(d));
    }
    let pos_stack = tape.concat_rows(&pos_logs);
    let pos_sum = tape.sum_all(pos_stack);
    terms.push(tape.scale(pos_sum, -eta / positives.len() as f64));

    let mut unl_logs = Vec::with_capacity(unlabeled.len());
    for clip in unlabeled {
        let d = score_node(tape, &disc.params, &disc.arch, &disc.dims, &disc.normalizer, clip)?;
        let neg = tape.scale(d, -1.0);
        let one_minus = tape.add_scalar(neg, 1.0);
        unl_logs.push(tape.log(one_minus));
    }
    let unl_stack = tape.concat_rows(&unl_logs);
    let unl_sum = tape.sum_all(unl_stack);
    terms.push(tape.scale(unl_sum, -1.0 / unlabeled.len() as f64));

    Ok(tape.add(terms[0], terms[1]))
}

/// Loss and gradients for one batch (used by training and gradient checks).
pub fn pu_loss_with_grads(
    disc: &Discriminator,
    positives: &[&Clip],
    unlabeled: &[&Clip],
    eta: f64,
) -> Result<(f64, ParamGrads)> {
    let mut tape = Tape::new(&disc.params);
    let loss = pu_loss_node(&mut tape, disc, positives, unlabeled, eta)?;
    tape.check_finite()?;
    let grads = tape.backward(loss, 1.0)?;
    Ok((tape.scalar(loss), grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscTrainConfig {
    pub steps: usize,
    /// Total batch size; half positives, half unlabeled.
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    pub eta: f64,
}

/// Minimize the PU objective with AdamW over balanced batches.
pub fn train_discriminator(
    disc: &mut Discriminator,
    positives: &[Clip],
    unlabeled: &[Clip],
    cfg: &DiscTrainConfig,
) -> Result<Vec<LossPoint>> {
    if positives.is_empty() {
        return Err(Error::NoPositives);
    }
    if unlabeled.is_empty() {
        return Err(Error::EmptyBatchSide("unlabeled"));
    }
    let mut opt = OptimizerState::zeros(&disc.params);
    let half = (cfg.batch_size / 2).max(1);
    let mut curve = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let mut rng =
            ChaCha20Rng::seed_from_u64(derive_seed(disc.train_seed, "disc-step", step as u64));
        let pos_batch: Vec<&Clip> = (0..half)
            .map(|_| positives.choose(&mut rng).expect("nonempty"))
            .collect();
        let unl_batch: Vec<&Clip> = (0..half)
            .map(|_| unlabeled.choose(&mut rng).expect("nonempty"))
            .collect();
        let (loss, grads) = pu_loss_with_grads(disc, &pos_batch, &unl_batch, cfg.eta)?;
        adamw_step(&mut disc.params, &grads, &cfg.optimizer, &mut opt)?;
        curve.push(LossPoint { step, loss });
    }
    Ok(curve)
}

/// Ranking AUC of `high` scores over `low` scores (ties count half).
pub fn ranking_auc(high: &[f64], low: &[f64]) -> f64 {
    if high.is_empty() || low.is_empty() {
        return f64::NAN;
    }
    let mut wins = 0.0;
    for &h in high {
        for &l in low {
            if h > l {
                wins += 1.0;
            } else if h == l {
                wins += 0.5;
            }
        }
    }
    wins / (high.len() * low.len()) as f64
}
