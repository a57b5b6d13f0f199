//! Declarative pipeline configuration: one JSON file drives every stage.
//! Unknown fields are rejected with line-precise errors; the full document
//! is snapshotted into the manifest so any run is reproducible from config
//! plus seed alone.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::schedule::{DEFAULT_BETA_END, DEFAULT_BETA_START};
use crate::disc::weight::WeightMapping;
use crate::episode::Source;
use crate::error::{Error, Result};
use crate::nn::adamw::AdamWConfig;
use crate::nn::layers::{arch_preset, TransformerArch};
use crate::sim::corruption::CorruptionSpec;
use crate::sim::task::TaskKind;
use crate::sim::world::TOY_DIMS;
use crate::util::fnv1a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset_id: String,
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub metrics: MetricsConfig,
    pub policy: PolicyStageConfig,
    pub discriminator: DiscStageConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub task_kinds: Vec<TaskKind>,
    pub groups: Vec<CorpusGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusGroup {
    pub name: String,
    pub count: usize,
    pub source: Source,
    pub corruption: CorruptionSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Keep the lowest fraction in each smoothness ranking.
    pub prescreen_fraction: f64,
    /// Coverage guard: minimum total normalized path length
    /// (0.05 per dimension by default).
    pub coverage_min: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            prescreen_fraction: 0.2,
            coverage_min: crate::util::round_sig12(0.05 * TOY_DIMS as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
}

impl StageTrainConfig {
    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamWConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyStageConfig {
    /// Trunk preset name (policy-tiny, policy-desk, policy-paper).
    pub arch_preset: String,
    pub chunk_len: usize,
    pub diffusion_steps: usize,
    pub pretrain: StageTrainConfig,
    pub posttrain: StageTrainConfig,
    /// Quality-weight warm-up length for post-training.
    pub warmup_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscStageConfig {
    pub arch_preset: String,
    /// Sub-clips sampled per episode.
    pub clips_per_episode: usize,
    /// Diffusion steps used for the residual energy.
    pub energy_steps: Vec<usize>,
    pub train: StageTrainConfig,
    pub eta: f64,
    pub weight_mapping: WeightMapping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub rollouts_per_task: usize,
    pub tasks: Vec<TaskKind>,
    /// Emit static SVG plots next to the report.
    pub plots: bool,
}

impl PipelineConfig {
    /// The standard synthetic corpus and desk-scale training settings: 200
    /// clean minimum-jerk demonstrations plus 200 corrupted ones (heavy
    /// jitter, wrong-goal, drift-and-pause mixes) over three task kinds.
    pub fn standard() -> PipelineConfig {
        let heavy_jitter = CorruptionSpec {
            jitter_std: vec![0.02, 0.02, 0.0, 0.02, 0.02, 0.0],
            ..CorruptionSpec::none()
        };
        let goal_fail = CorruptionSpec {
            jitter_std: vec![0.006, 0.006, 0.0, 0.006, 0.006, 0.0],
            fail_goal: true,
            ..CorruptionSpec::none()
        };
        let drift_pause = CorruptionSpec {
            jitter_std: vec![0.0; TOY_DIMS],
            drift_amp: 0.10,
            drift_freq: 0.55,
            pause_prob: 0.5,
            pause_len: 14,
            delay_steps: 6,
            ..CorruptionSpec::none()
        };
        PipelineConfig {
            dataset_id: "standard".into(),
            seed: 0,
            corpus: CorpusConfig {
                task_kinds: vec![
                    TaskKind::PickPlace,
                    TaskKind::Handover,
                    TaskKind::BimanualLift,
                ],
                groups: vec![
                    CorpusGroup {
                        name: "clean".into(),
                        count: 200,
                        source: Source::GeneratedExpert,
                        corruption: CorruptionSpec::none(),
                    },
                    CorpusGroup {
                        name: "jitter".into(),
                        count: 100,
                        source: Source::GeneratedCorrupted,
                        corruption: heavy_jitter,
                    },
                    CorpusGroup {
                        name: "goal".into(),
                        count: 50,
                        source: Source::GeneratedCorrupted,
                        corruption: goal_fail,
                    },
                    CorpusGroup {
                        name: "driftpause".into(),
                        count: 50,
                        source: Source::GeneratedCorrupted,
                        corruption: drift_pause,
                    },
                ],
            },
            metrics: MetricsConfig::default(),
            policy: PolicyStageConfig {
                arch_preset: "policy-tiny".into(),
                chunk_len: 32,
                diffusion_steps: 100,
                pretrain: StageTrainConfig {
                    steps: 700,
                    batch_size: 32,
                    lr: 6e-4,
                    weight_decay: 0.01,
                },
                posttrain: StageTrainConfig {
                    steps: 400,
                    batch_size: 32,
                    lr: 3e-4,
                    weight_decay: 0.01,
                },
                warmup_steps: 100,
            },
            discriminator: DiscStageConfig {
                arch_preset: "disc-desk".into(),
                clips_per_episode: 8,
                energy_steps: vec![10, 50, 90],
                train: StageTrainConfig {
                    steps: 600,
                    batch_size: 32,
                    lr: 1e-3,
                    weight_decay: 0.01,
                },
                eta: 0.5,
                weight_mapping: WeightMapping::OddsRatio,
            },
            eval: EvalConfig {
                rollouts_per_task: 20,
                tasks: vec![TaskKind::PickPlace, TaskKind::BimanualLift],
                plots: true,
            },
        }
    }

    /// A minimal configuration for fast smoke runs.
    pub fn mini() -> PipelineConfig {
        let mut cfg = PipelineConfig::standard();
        cfg.dataset_id = "mini".into();
        for group in &mut cfg.corpus.groups {
            group.count = group.count.div_ceil(10);
        }
        cfg.policy.pretrain.steps = 40;
        cfg.policy.posttrain.steps = 25;
        cfg.policy.warmup_steps = 10;
        cfg.discriminator.train.steps = 40;
        cfg.discriminator.clips_per_episode = 4;
        cfg.eval.rollouts_per_task = 3;
        cfg.eval.tasks = vec![TaskKind::PickPlace];
        cfg.eval.plots = false;
        cfg
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let cfg: PipelineConfig = crate::jsonio::load(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::jsonio::save(path, self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.task_kinds.is_empty() {
            return Err(Error::Config("corpus.task_kinds must be nonempty".into()));
        }
        if self.corpus.groups.is_empty() {
            return Err(Error::Config("corpus.groups must be nonempty".into()));
        }
        for group in &self.corpus.groups {
            group.corruption.validate()?;
            if group.count == 0 {
                return Err(Error::Config(format!("group {} has count 0", group.name)));
            }
        }
        if !(self.metrics.prescreen_fraction > 0.0 && self.metrics.prescreen_fraction < 1.0) {
            return Err(Error::Config(
                "metrics.prescreen_fraction must lie in (0,1)".into(),
            ));
        }
        self.policy_arch()?;
        self.disc_arch()?;
        if self.policy.chunk_len == 0 {
            return Err(Error::Config("policy.chunk_len must be >= 1".into()));
        }
        if self.discriminator.clips_per_episode == 0 {
            return Err(Error::Config(
                "discriminator.clips_per_episode must be >= 1".into(),
            ));
        }
        for &s in &self.discriminator.energy_steps {
            if s == 0 || s > self.policy.diffusion_steps {
                return Err(Error::Config(format!(
                    "energy step {s} outside 1..={}",
                    self.policy.diffusion_steps
                )));
            }
        }
        if self.eval.rollouts_per_task == 0 || self.eval.tasks.is_empty() {
            return Err(Error::Config("eval needs tasks and rollouts".into()));
        }
        Ok(())
    }

    pub fn policy_arch(&self) -> Result<TransformerArch> {
        arch_preset(&self.policy.arch_preset)
            .ok_or_else(|| Error::Config(format!("unknown arch preset {:?}", self.policy.arch_preset)))
    }

    pub fn disc_arch(&self) -> Result<TransformerArch> {
        arch_preset(&self.discriminator.arch_preset).ok_or_else(|| {
            Error::Config(format!(
                "unknown arch preset {:?}",
                self.discriminator.arch_preset
            ))
        })
    }

    pub fn schedule(&self) -> Result<crate::diffusion::NoiseSchedule> {
        crate::diffusion::NoiseSchedule::linear(
            self.policy.diffusion_steps,
            DEFAULT_BETA_START,
            DEFAULT_BETA_END,
        )
    }

    /// Stable digest of the canonical serialized config, stamped into stage
    /// markers.
    pub fn digest(&self) -> String {
        let json = serde_json::to_value(self).expect("config serializes");
        format!("{:016x}", fnv1a(crate::jsonio::render(&json).as_bytes()))
    }

    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_config_is_valid_with_400_episodes() {
        let cfg = PipelineConfig::standard();
        cfg.validate().unwrap();
        let total: usize = cfg.corpus.groups.iter().map(|g| g.count).sum();
        assert_eq!(total, 400);
        assert_eq!(
            cfg.corpus.groups.iter().filter(|g| g.source == Source::GeneratedExpert)
                .map(|g| g.count).sum::<usize>(),
            200
        );
    }

    #[test]
    fn config_round_trips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let cfg = PipelineConfig::standard();
        cfg.save(&path).unwrap();
        let back = PipelineConfig::load(&path).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
    }

    #[test]
    fn unknown_fields_rejected_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let mut doc = serde_json::to_value(PipelineConfig::standard()).unwrap();
        doc["corpus"]["groups"][0]["corruption"]["jitter_stdd"] = serde_json::json!(0.5);
        std::fs::write(&path, crate::jsonio::render(&doc)).unwrap();
        let err = PipelineConfig::load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("jitter_stdd"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn invalid_fraction_rejected() {
        let mut cfg = PipelineConfig::standard();
        cfg.metrics.prescreen_fraction = 1.5;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn digest_changes_with_content() {
        let a = PipelineConfig::standard();
        let mut b = a.clone();
        b.seed = 123;
        assert_ne!(a.digest(), b.digest());
    }
}
