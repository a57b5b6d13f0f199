//! Recorded demonstration episodes and the `demoforge-episode-v1` file
//! format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonio;
use crate::mat::Mat;

pub const EPISODE_SCHEMA: &str = "demoforge-episode-v1";

/// Minimum episode length: the centered third-difference stencil needs
/// indices t-3..t+3 around at least one interior sample.
pub const MIN_EPISODE_LEN: usize = 7;

/// Default logging interval (20 Hz).
pub const DEFAULT_DT: f64 = 0.05;

/// Where an episode came from. Clean scripted demonstrations play the role
/// of curated pretraining data; corrupted ones model noisy teleoperation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Simulated,
    GeneratedExpert,
    GeneratedCorrupted,
}

impl Source {
    /// Clean sources form the pretraining corpus.
    pub fn is_clean(self) -> bool {
        matches!(self, Source::Simulated | Source::GeneratedExpert)
    }
}

/// One demonstration: joint states and per-step commands logged at fixed
/// rate, plus the task context needed to replay or learn from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub episode_id: String,
    pub task_id: String,
    pub instruction: String,
    pub dt: f64,
    pub dims: usize,
    pub source: Source,
    /// T x D joint values.
    pub states: Mat,
    /// T x D commands; `actions.row(t)` is applied to `states.row(t)`.
    pub actions: Mat,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.rows() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.len() < MIN_EPISODE_LEN {
            return Err(Error::TooShort {
                got: self.len(),
                min: MIN_EPISODE_LEN,
            });
        }
        if self.states.shape() != self.actions.shape() {
            return Err(Error::ShapeMismatch(format!(
                "episode {}: states {:?} vs actions {:?}",
                self.episode_id,
                self.states.shape(),
                self.actions.shape()
            )));
        }
        if self.states.cols() != self.dims {
            return Err(Error::DimMismatch {
                expected: self.dims,
                got: self.states.cols(),
                context: format!("episode {}", self.episode_id),
            });
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!(
                "episode {}: dt must be positive, got {}",
                self.episode_id, self.dt
            )));
        }
        if !self.states.all_finite() || !self.actions.all_finite() {
            return Err(Error::NonFinite(format!("episode {}", self.episode_id)));
        }
        Ok(())
    }
}

/// On-disk layout of `demoforge-episode-v1`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpisodeFile {
    schema: String,
    episode_id: String,
    task_id: String,
    instruction: String,
    dt: f64,
    dims: usize,
    source: Source,
    states: Mat,
    actions: Mat,
}

pub fn save_episode(path: &Path, episode: &Episode) -> Result<()> {
    episode.validate()?;
    let file = EpisodeFile {
        schema: EPISODE_SCHEMA.to_string(),
        episode_id: episode.episode_id.clone(),
        task_id: episode.task_id.clone(),
        instruction: episode.instruction.clone(),
        dt: episode.dt,
        dims: episode.dims,
        source: episode.source,
        states: episode.states.clone(),
        actions: episode.actions.clone(),
    };
    jsonio::save(path, &file)
}

pub fn load_episode(path: &Path) -> Result<Episode> {
    let file: EpisodeFile = jsonio::load(path)?;
    if file.schema != EPISODE_SCHEMA {
        return Err(Error::SchemaMismatch {
            expected: EPISODE_SCHEMA.to_string(),
            found: file.schema,
        });
    }
    let episode = Episode {
        episode_id: file.episode_id,
        task_id: file.task_id,
        instruction: file.instruction,
        dt: file.dt,
        dims: file.dims,
        source: file.source,
        states: file.states,
        actions: file.actions,
    };
    episode.validate()?;
    Ok(episode)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn toy_episode(id: &str, t: usize, d: usize) -> Episode {
        Episode {
            episode_id: id.to_string(),
            task_id: "task".to_string(),
            instruction: "do the thing".to_string(),
            dt: DEFAULT_DT,
            dims: d,
            source: Source::GeneratedExpert,
            states: Mat::from_fn(t, d, |i, j| (i + j) as f64 * 0.125),
            actions: Mat::zeros(t, d),
        }
    }

    #[test]
    fn round_trip_preserves_episode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        let ep = toy_episode("ep-0", 10, 3);
        save_episode(&path, &ep).unwrap();
        let back = load_episode(&path).unwrap();
        assert_eq!(back, ep);
    }

    #[test]
    fn wrong_schema_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        let ep = toy_episode("ep-0", 10, 3);
        save_episode(&path, &ep).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace(EPISODE_SCHEMA, "demoforge-episode-v9");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            load_episode(&path),
            Err(Error::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn short_episode_rejected() {
        let ep = toy_episode("ep-0", 6, 3);
        assert!(matches!(ep.validate(), Err(Error::TooShort { .. })));
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let mut ep = toy_episode("ep-0", 10, 3);
        ep.actions = Mat::zeros(9, 3);
        assert!(ep.validate().is_err());
    }
}
