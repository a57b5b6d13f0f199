//! Score-to-weight conversion. The default odds-ratio mapping follows the
//! discriminator-weighted behavior cloning convention; mappings are
//! pluggable so alternatives can be compared, and assigned weights are
//! normalized to mean 1 over the training set.

use serde::{Deserialize, Serialize};

use crate::disc::model::{SCORE_MAX, SCORE_MIN};
use crate::error::{Error, Result};
use crate::util::round_sig12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightMapping {
    /// w = d / (1 - d): the odds of the clip being high quality.
    #[default]
    OddsRatio,
    /// w = d: direct score weighting, for ablations.
    Linear,
}

/// Raw (un-normalized) weight for a clipped score.
pub fn score_to_weight(mapping: WeightMapping, d: f64) -> Result<f64> {
    if !(SCORE_MIN..=SCORE_MAX).contains(&d) {
        return Err(Error::ScoreOutOfRange(d));
    }
    Ok(match mapping {
        WeightMapping::OddsRatio => d / (1.0 - d),
        WeightMapping::Linear => d,
    })
}

/// Scale weights in place to mean 1.
pub fn normalize_mean_one(weights: &mut [f64]) {
    let n = weights.len();
    if n == 0 {
        return;
    }
    let mean = weights.iter().sum::<f64>() / n as f64;
    if mean > 0.0 {
        for w in weights.iter_mut() {
            *w = round_sig12(*w / mean);
        }
    }
}

/// Per-clip scores and normalized weights for a whole dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub mapping: WeightMapping,
    /// (episode_id, clip start, score d, normalized weight w).
    pub entries: Vec<(String, usize, f64, f64)>,
}

impl WeightTable {
    /// Convert scored clips into mean-normalized weights.
    pub fn from_scores(
        mapping: WeightMapping,
        scored: &[(String, usize, f64)],
    ) -> Result<WeightTable> {
        let mut weights: Vec<f64> = scored
            .iter()
            .map(|(_, _, d)| score_to_weight(mapping, *d))
            .collect::<Result<_>>()?;
        normalize_mean_one(&mut weights);
        Ok(WeightTable {
            mapping,
            entries: scored
                .iter()
                .zip(weights)
                .map(|((id, start, d), w)| (id.clone(), *start, *d, w))
                .collect(),
        })
    }
}
