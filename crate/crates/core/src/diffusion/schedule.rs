//! DDPM noise schedule: linear betas with precomputed alpha products.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_BETA_START: f64 = 1e-4;
/// Sized for the 100-step schedule: the signal must actually be destroyed
/// by the final step (alpha_bar_N ~ 2e-5 here). The textbook 0.02 endpoint
/// belongs to 1000-step schedules and would leave alpha_bar_N ~ 0.37,
/// putting ancestral sampling's N(0,1) start far outside the training
/// distribution.
pub const DEFAULT_BETA_END: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Linear beta schedule over `n` steps.
    pub fn linear(n: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if n < 2 || !(0.0 < beta_start && beta_start < beta_end && beta_end < 1.0) {
            return Err(Error::Config(format!(
                "invalid schedule: n={n}, beta {beta_start}..{beta_end}"
            )));
        }
        let betas: Vec<f64> = (0..n)
            .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (n - 1) as f64)
            .collect();
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(n);
        let mut prod = 1.0;
        for &a in &alphas {
            prod *= a;
            alpha_bars.push(prod);
        }
        Ok(NoiseSchedule {
            betas,
            alphas,
            alpha_bars,
        })
    }

    pub fn default_schedule() -> Self {
        Self::linear(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
            .expect("default schedule is valid")
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    /// Cumulative alpha product at 1-indexed diffusion step `n`.
    pub fn alpha_bar(&self, n: usize) -> Result<f64> {
        self.check_step(n)?;
        Ok(self.alpha_bars[n - 1])
    }

    fn check_step(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.len() {
            return Err(Error::StepOutOfRange {
                got: n,
                max: self.len(),
            });
        }
        Ok(())
    }

    /// Posterior variance for the reverse step at `n` (the "fixed small"
    /// choice): beta_tilde = (1 - abar_{n-1}) / (1 - abar_n) * beta_n.
    pub fn posterior_variance(&self, n: usize) -> Result<f64> {
        self.check_step(n)?;
        let abar = self.alpha_bars[n - 1];
        let abar_prev = if n >= 2 { self.alpha_bars[n - 2] } else { 1.0 };
        Ok((1.0 - abar_prev) / (1.0 - abar) * self.betas[n - 1])
    }
}

/// Forward diffusion: `sqrt(abar_n) * chunk + sqrt(1 - abar_n) * noise`.
pub fn forward_diffuse(
    schedule: &NoiseSchedule,
    chunk: &Mat,
    n: usize,
    noise: &Mat,
) -> Result<Mat> {
    if chunk.shape() != noise.shape() {
        return Err(Error::ShapeMismatch(format!(
            "chunk {:?} vs noise {:?}",
            chunk.shape(),
            noise.shape()
        )));
    }
    let abar = schedule.alpha_bar(n)?;
    let (signal, spread) = (abar.sqrt(), (1.0 - abar).sqrt());
    let mut out = chunk.scale(signal);
    for (o, &e) in out.data_mut().iter_mut().zip(noise.data()) {
        *o += spread * e;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_invariants() {
        let s = NoiseSchedule::default_schedule();
        assert_eq!(s.len(), 100);
        for w in s.betas.windows(2) {
            assert!(0.0 < w[0] && w[0] < w[1] && w[1] < 1.0);
        }
        for w in s.alpha_bars.windows(2) {
            assert!(w[1] < w[0], "alpha_bar must strictly decrease");
        }
        for n in 1..=s.len() {
            let abar = s.alpha_bar(n).unwrap();
            let split = abar.sqrt().powi(2) + (1.0 - abar).sqrt().powi(2);
            assert!((split - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_noise_scales_by_sqrt_alpha_bar() {
        let s = NoiseSchedule::default_schedule();
        let chunk = Mat::from_fn(4, 3, |i, j| (i + j) as f64);
        let zero = Mat::zeros(4, 3);
        let noised = forward_diffuse(&s, &chunk, 50, &zero).unwrap();
        let expected = chunk.scale(s.alpha_bar(50).unwrap().sqrt());
        for (a, b) in noised.data().iter().zip(expected.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn near_zero_beta_start_approaches_identity() {
        // the n -> 0 convention: abar_1 = 1 - beta_1 ~= 1, so the first step
        // barely perturbs the chunk
        let s = NoiseSchedule::linear(100, 1e-9, 0.02).unwrap();
        let chunk = Mat::from_fn(2, 2, |i, j| (i * 2 + j) as f64);
        let zero = Mat::zeros(2, 2);
        let noised = forward_diffuse(&s, &chunk, 1, &zero).unwrap();
        for (a, b) in noised.data().iter().zip(chunk.data()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn step_out_of_range_rejected() {
        let s = NoiseSchedule::default_schedule();
        let m = Mat::zeros(2, 2);
        assert!(matches!(
            forward_diffuse(&s, &m, 0, &m),
            Err(Error::StepOutOfRange { .. })
        ));
        assert!(matches!(
            forward_diffuse(&s, &m, 101, &m),
            Err(Error::StepOutOfRange { .. })
        ));
    }

    #[test]
    fn posterior_variance_is_positive_and_below_beta() {
        let s = NoiseSchedule::default_schedule();
        for n in 2..=s.len() {
            let v = s.posterior_variance(n).unwrap();
            assert!(v > 0.0 && v <= s.betas[n - 1] + 1e-15);
        }
        assert_eq!(s.posterior_variance(1).unwrap(), 0.0);
    }
}
