//! Kinematic quality metrics over episodes.
//!
//! States are min-max normalized per dimension over the whole dataset, then
//! velocity, acceleration and jerk come from centered finite differences
//!
//! ```text
//! v_t = (s_{t+1} - s_{t-1}) / 2dt
//! a_t = (v_{t+1} - v_{t-1}) / 2dt
//! j_t = (a_{t+1} - a_{t-1}) / 2dt
//! ```
//!
//! reported on the 1-indexed range t = 4..T-3 where all three stencils are
//! defined (0-indexed: 3..=T-4; each profile has exactly T-6 rows). Episode
//! scores are the RMS of acceleration/jerk across that range and all
//! dimensions; coverage is the total variation of the normalized states over
//! the full episode and guards against stationary episodes that trivially
//! score smooth.

use serde::{Deserialize, Serialize};

use crate::episode::{Episode, MIN_EPISODE_LEN};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::util::round_sig12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationScope {
    Dataset,
}

/// Per-dimension min-max extrema over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub per_dim_min: Vec<f64>,
    pub per_dim_max: Vec<f64>,
    pub scope: NormalizationScope,
}

impl NormalizationStats {
    pub fn dims(&self) -> usize {
        self.per_dim_min.len()
    }

    /// A dimension that never moves anywhere in the dataset. Such dimensions
    /// normalize to 0 and contribute nothing to the metrics.
    pub fn zero_range(&self, k: usize) -> bool {
        self.per_dim_max[k] == self.per_dim_min[k]
    }

    /// Identity mapping on [0,1]^d, for tests and already-normalized data.
    pub fn identity(dims: usize) -> Self {
        NormalizationStats {
            per_dim_min: vec![0.0; dims],
            per_dim_max: vec![1.0; dims],
            scope: NormalizationScope::Dataset,
        }
    }
}

/// Velocity/acceleration/jerk rows on the valid index range.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicsProfile {
    pub velocity: Mat,
    pub acceleration: Mat,
    pub jerk: Mat,
    /// 1-indexed inclusive range (4, T-3) the rows correspond to.
    pub valid_range: (usize, usize),
}

/// Episode-level smoothness summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessScores {
    pub a_ep: f64,
    pub j_ep: f64,
    pub coverage: f64,
}

/// Elementwise extrema of all states across all episodes.
pub fn compute_normalization_stats(episodes: &[Episode]) -> Result<NormalizationStats> {
    let first = episodes
        .first()
        .ok_or_else(|| Error::EmptyDataset("normalization stats".into()))?;
    let dims = first.dims;
    let mut per_dim_min = vec![f64::INFINITY; dims];
    let mut per_dim_max = vec![f64::NEG_INFINITY; dims];
    for ep in episodes {
        if ep.dims != dims {
            return Err(Error::DimMismatch {
                expected: dims,
                got: ep.dims,
                context: format!("episode {}", ep.episode_id),
            });
        }
        for t in 0..ep.len() {
            for (k, &x) in ep.states.row(t).iter().enumerate() {
                per_dim_min[k] = per_dim_min[k].min(x);
                per_dim_max[k] = per_dim_max[k].max(x);
            }
        }
    }
    Ok(NormalizationStats {
        per_dim_min: per_dim_min.into_iter().map(round_sig12).collect(),
        per_dim_max: per_dim_max.into_iter().map(round_sig12).collect(),
        scope: NormalizationScope::Dataset,
    })
}

/// Map each entry to `(x - min_k) / (max_k - min_k)`; zero-range dimensions
/// map to 0.
pub fn normalize(episode: &Episode, stats: &NormalizationStats) -> Result<Mat> {
    if stats.dims() != episode.dims {
        return Err(Error::DimMismatch {
            expected: stats.dims(),
            got: episode.dims,
            context: format!("normalizing episode {}", episode.episode_id),
        });
    }
    let t_len = episode.len();
    let mut out = Mat::zeros(t_len, episode.dims);
    for t in 0..t_len {
        let src = episode.states.row(t);
        let dst = out.row_mut(t);
        for k in 0..episode.dims {
            let range = stats.per_dim_max[k] - stats.per_dim_min[k];
            dst[k] = if range == 0.0 {
                0.0
            } else {
                (src[k] - stats.per_dim_min[k]) / range
            };
        }
    }
    Ok(out)
}

/// Centered finite differences over normalized states.
pub fn kinematics(normalized: &Mat, dt: f64) -> Result<KinematicsProfile> {
    let t_len = normalized.rows();
    if t_len < MIN_EPISODE_LEN {
        return Err(Error::TooShort {
            got: t_len,
            min: MIN_EPISODE_LEN,
        });
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let d = normalized.cols();
    let two_dt = 2.0 * dt;
    let central = |src: &Mat, i: usize, k: usize| (src.get(i + 1, k) - src.get(i - 1, k)) / two_dt;

    // v defined on 0-indexed 1..=T-2, a on 2..=T-3, j on 3..=T-4. Each array
    // below is stored from its first defined index.
    let velocity = Mat::from_fn(t_len - 2, d, |r, k| central(normalized, r + 1, k));
    let acceleration = Mat::from_fn(t_len - 4, d, |r, k| central(&velocity, r + 1, k));
    let jerk = Mat::from_fn(t_len - 6, d, |r, k| central(&acceleration, r + 1, k));

    Ok(KinematicsProfile {
        velocity: velocity.slice_rows(2, t_len - 4),
        acceleration: acceleration.slice_rows(1, t_len - 5),
        jerk,
        valid_range: (4, t_len - 3),
    })
}

/// RMS acceleration/jerk over the valid range plus total-variation coverage
/// over the full episode. Values are rounded to 12 significant digits, the
/// precision at which they are serialized.
pub fn smoothness_scores(profile: &KinematicsProfile, normalized: &Mat) -> SmoothnessScores {
    let n = (profile.acceleration.rows() * profile.acceleration.cols()) as f64;
    let a_ep = (profile.acceleration.sq_norm() / n).sqrt();
    let j_ep = (profile.jerk.sq_norm() / n).sqrt();
    let mut coverage = 0.0;
    for t in 0..normalized.rows() - 1 {
        let cur = normalized.row(t);
        let next = normalized.row(t + 1);
        for k in 0..normalized.cols() {
            coverage += (next[k] - cur[k]).abs();
        }
    }
    SmoothnessScores {
        a_ep: round_sig12(a_ep),
        j_ep: round_sig12(j_ep),
        coverage: round_sig12(coverage),
    }
}

/// Full chain: normalize, differentiate, score.
pub fn episode_smoothness(episode: &Episode, stats: &NormalizationStats) -> Result<SmoothnessScores> {
    let normalized = normalize(episode, stats)?;
    let profile = kinematics(&normalized, episode.dt)?;
    Ok(smoothness_scores(&profile, &normalized))
}
