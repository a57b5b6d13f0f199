//! The pipeline stages behind the CLI subcommands.
//!
//! Stages communicate exclusively through files in a working directory:
//!
//! ```text
//! workdir/
//!   manifest.json            dataset index + stage markers
//!   episodes/<id>.json       demonstration files
//!   checkpoints/<arm>.ckpt   policy / discriminator weights
//!   logs/<stage>_loss.jsonl  training curves
//!   logpi.json               clip table with energies and proxies
//!   report.jsonl, report.txt, plots/*.svg
//! ```
//!
//! Each stage checks its prerequisite marker, does its work, stamps itself
//! into the manifest, and is a no-op when already stamped (unless forced).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::diffusion::model::PolicyDims;
use crate::diffusion::sample::PolicyController;
use crate::diffusion::train::{
    train_policy, ActionNormalizer, ChunkSource, LossPoint, Policy, PolicyTrainConfig,
};
use crate::disc::clip::{clips_at, sample_clip_starts, Clip};
use crate::disc::energy::{build_logpi_table, LogpiTable};
use crate::disc::model::{DiscDims, Discriminator};
use crate::disc::train::{train_discriminator, DiscTrainConfig};
use crate::disc::weight::WeightTable;
use crate::diffusion::embed::{instruction_embedding, INSTRUCTION_DIM};
use crate::episode::{load_episode, save_episode, Episode};
use crate::error::{Error, Result};
use crate::jsonio;
use crate::manifest::{
    load_manifest, prescreen, record_replay, save_manifest, DatasetManifest, ManifestEntry,
    QualityRecord, ReplayOutcome, StageStamp,
};
use crate::metrics::{compute_normalization_stats, episode_smoothness};
use crate::nn::adamw::OptimizerState;
use crate::nn::checkpoint::{load_checkpoint, save_checkpoint};
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::plot;
use crate::pipeline::report::{save_report, summarize_rollouts, EvalReport, EvalRow};
use crate::sim::corruption::generate_demo;
use crate::sim::rollout::rollout_policy;
use crate::sim::task::{TaskSpec, OBS_FEATURES_LEN};
use crate::sim::world::TOY_DIMS;
use crate::util::{derive_seed, fnv1a};

pub const STAGE_GEN_CORPUS: &str = "gen_corpus";
pub const STAGE_CURATE: &str = "curate";
pub const STAGE_PRETRAIN: &str = "pretrain";
pub const STAGE_COMPUTE_LOGPI: &str = "compute_logpi";
pub const STAGE_TRAIN_DISC: &str = "train_disc";
pub const STAGE_SCORE: &str = "score";
pub const STAGE_POSTTRAIN: &str = "posttrain";
pub const STAGE_POSTTRAIN_VANILLA: &str = "posttrain_vanilla";
pub const STAGE_EVAL: &str = "eval";

/// Evaluation arm names; each maps to a checkpoint file.
pub const ARM_PRETRAINED: &str = "pretrained";
pub const ARM_WEIGHTED: &str = "weighted";
pub const ARM_VANILLA: &str = "vanilla";

#[derive(Debug, Clone)]
pub struct Workdir {
    root: PathBuf,
}

impl Workdir {
    pub fn new(root: impl Into<PathBuf>) -> Workdir {
        Workdir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn episodes_dir(&self) -> PathBuf {
        self.root.join("episodes")
    }

    pub fn checkpoints_dir(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn checkpoint_path(&self, arm: &str) -> PathBuf {
        self.checkpoints_dir().join(format!("{arm}.ckpt"))
    }

    pub fn logs_dir(&self) -> PathBuf {
        self.root.join("logs")
    }

    pub fn logpi_path(&self) -> PathBuf {
        self.root.join("logpi.json")
    }

    pub fn plots_dir(&self) -> PathBuf {
        self.root.join("plots")
    }

    fn ensure_dirs(&self) -> Result<()> {
        for dir in [
            self.root.clone(),
            self.episodes_dir(),
            self.checkpoints_dir(),
            self.logs_dir(),
        ] {
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(())
    }

    pub fn load_manifest(&self) -> Result<DatasetManifest> {
        load_manifest(&self.manifest_path())
    }

    fn save_manifest(&self, manifest: &DatasetManifest) -> Result<()> {
        save_manifest(&self.manifest_path(), manifest)
    }

    /// All episodes in manifest order.
    pub fn load_episodes(&self, manifest: &DatasetManifest) -> Result<Vec<Episode>> {
        manifest
            .episodes
            .iter()
            .map(|entry| load_episode(&crate::manifest::episode_path(&self.manifest_path(), entry)))
            .collect()
    }
}

fn stamp(cfg: &PipelineConfig) -> StageStamp {
    StageStamp {
        seed: cfg.seed,
        config_digest: cfg.digest(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn write_loss_log(wd: &Workdir, stage: &str, curve: &[LossPoint]) -> Result<()> {
    let path = wd.logs_dir().join(format!("{stage}_loss.jsonl"));
    let mut out = String::new();
    for point in curve {
        let value = serde_json::to_value(point).expect("loss point serializes");
        out.push_str(&jsonio::render_compact(&value));
        out.push('\n');
    }
    std::fs::write(&path, out).map_err(|e| Error::io(&path, e))
}

fn policy_dims(cfg: &PipelineConfig) -> PolicyDims {
    PolicyDims {
        state_dim: TOY_DIMS,
        act_dim: TOY_DIMS,
        obs_dim: OBS_FEATURES_LEN,
        instr_dim: INSTRUCTION_DIM,
        chunk_len: cfg.policy.chunk_len,
        diffusion_steps: cfg.policy.diffusion_steps,
    }
}

fn disc_dims(cfg: &PipelineConfig) -> DiscDims {
    DiscDims {
        state_dim: TOY_DIMS,
        act_dim: TOY_DIMS,
        obs_dim: OBS_FEATURES_LEN,
        instr_dim: INSTRUCTION_DIM,
        chunk_len: cfg.policy.chunk_len,
    }
}

// ---------------------------------------------------------------------------
// gen-corpus
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct GenSummary {
    pub skipped: bool,
    pub episodes: usize,
}

/// Generate the configured demonstration mix and a fresh manifest.
pub fn gen_corpus(cfg: &PipelineConfig, wd: &Workdir, force: bool) -> Result<GenSummary> {
    if !force && wd.manifest_path().is_file() {
        let manifest = wd.load_manifest()?;
        if manifest.has_stage(STAGE_GEN_CORPUS) {
            return Ok(GenSummary {
                skipped: true,
                episodes: manifest.episodes.len(),
            });
        }
    }
    wd.ensure_dirs()?;
    let mut manifest = DatasetManifest::new(cfg.dataset_id.clone(), cfg.snapshot());
    let mut counter: u64 = 0;
    for group in &cfg.corpus.groups {
        for i in 0..group.count {
            let kind = cfg.corpus.task_kinds[i % cfg.corpus.task_kinds.len()];
            let spec = TaskSpec::new(kind, derive_seed(cfg.seed, "episode-layout", counter));
            let episode_id = format!("{}-{}-{:04}", group.name, kind.name(), counter);
            let episode = generate_demo(
                &spec,
                &group.corruption,
                derive_seed(cfg.seed, "episode-demo", counter),
                &episode_id,
                group.source,
            )?;
            let file = format!("episodes/{episode_id}.json");
            save_episode(&wd.root().join(&file), &episode)?;
            manifest.episodes.push(ManifestEntry {
                path: file,
                quality: QualityRecord::new(episode_id),
            });
            counter += 1;
        }
    }
    manifest.mark_stage(STAGE_GEN_CORPUS, stamp(cfg));
    wd.save_manifest(&manifest)?;
    Ok(GenSummary {
        skipped: false,
        episodes: manifest.episodes.len(),
    })
}

// ---------------------------------------------------------------------------
// curate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CurateSummary {
    pub skipped: bool,
    pub total: usize,
    pub prescreen_kept: usize,
    pub high_quality: usize,
}

impl CurateSummary {
    pub fn prescreen_fraction(&self) -> f64 {
        self.prescreen_kept as f64 / self.total.max(1) as f64
    }

    pub fn high_quality_fraction(&self) -> f64 {
        self.high_quality as f64 / self.total.max(1) as f64
    }
}

/// Smoothness metrics, pre-screen intersection, replay validation.
pub fn curate(cfg: &PipelineConfig, wd: &Workdir, force: bool) -> Result<CurateSummary> {
    let mut manifest = wd.load_manifest()?;
    manifest.require_stage(STAGE_CURATE, STAGE_GEN_CORPUS)?;
    if manifest.has_stage(STAGE_CURATE) && !force {
        let summary = CurateSummary {
            skipped: true,
            total: manifest.episodes.len(),
            prescreen_kept: manifest.episodes.iter().filter(|e| e.quality.in_prescreen).count(),
            high_quality: manifest
                .episodes
                .iter()
                .filter(|e| e.quality.in_high_quality)
                .count(),
        };
        return Ok(summary);
    }
    let episodes = wd.load_episodes(&manifest)?;
    let stats = compute_normalization_stats(&episodes)?;

    // metrics stage: owns a_ep / j_ep / coverage
    for (entry, episode) in manifest.episodes.iter_mut().zip(&episodes) {
        let scores = episode_smoothness(episode, &stats)?;
        entry.quality.a_ep = Some(scores.a_ep);
        entry.quality.j_ep = Some(scores.j_ep);
        entry.quality.coverage = Some(scores.coverage);
    }
    manifest.normalization_stats = Some(stats);

    // curation stage: memberships
    let mut records: Vec<QualityRecord> =
        manifest.episodes.iter().map(|e| e.quality.clone()).collect();
    prescreen(
        &mut records,
        cfg.metrics.prescreen_fraction,
        cfg.metrics.coverage_min,
    )?;
    let by_id: BTreeMap<&str, usize> = episodes
        .iter()
        .enumerate()
        .map(|(i, e)| (e.episode_id.as_str(), i))
        .collect();
    for record in &mut records {
        if record.in_prescreen {
            let episode = &episodes[by_id[record.episode_id.as_str()]];
            let spec = TaskSpec::parse_task_id(&episode.task_id)?;
            let result = crate::sim::rollout::replay(episode, &spec)?;
            record_replay(
                record,
                ReplayOutcome {
                    success: result.success,
                    collision_free: result.collision_free,
                },
            )?;
        }
    }
    let prescreen_kept = records.iter().filter(|r| r.in_prescreen).count();
    let high_quality = records.iter().filter(|r| r.in_high_quality).count();
    for (entry, record) in manifest.episodes.iter_mut().zip(records) {
        entry.quality = record;
    }
    manifest.mark_stage(STAGE_CURATE, stamp(cfg));
    wd.save_manifest(&manifest)?;
    Ok(CurateSummary {
        skipped: false,
        total: manifest.episodes.len(),
        prescreen_kept,
        high_quality,
    })
}

// ---------------------------------------------------------------------------
// pretrain / posttrain
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub skipped: bool,
    pub steps: usize,
    pub first_loss: f64,
    pub final_loss: f64,
}

fn curve_summary(curve: &[LossPoint]) -> (f64, f64) {
    let first = curve.first().map_or(0.0, |p| p.loss);
    let last = curve.last().map_or(0.0, |p| p.loss);
    (first, last)
}

/// Pretrain the policy on the clean (simulated/expert) subset with uniform
/// weights.
pub fn pretrain(cfg: &PipelineConfig, wd: &Workdir, force: bool) -> Result<TrainSummary> {
    let mut manifest = wd.load_manifest()?;
    manifest.require_stage(STAGE_PRETRAIN, STAGE_CURATE)?;
    if manifest.has_stage(STAGE_PRETRAIN) && !force {
        return Ok(TrainSummary {
            skipped: true,
            steps: cfg.policy.pretrain.steps,
            first_loss: 0.0,
            final_loss: 0.0,
        });
    }
    let episodes = wd.load_episodes(&manifest)?;
    let clean: Vec<Episode> = episodes
        .into_iter()
        .filter(|e| e.source.is_clean())
        .collect();
    if clean.is_empty() {
        return Err(Error::EmptyDataset("pretraining corpus".into()));
    }
    let normalizer = ActionNormalizer::fit(clean.iter())?;
    let source = ChunkSource::prepare(clean, None, cfg.policy.chunk_len)?;
    let mut policy = Policy::init(
        cfg.policy_arch()?,
        policy_dims(cfg),
        normalizer,
        derive_seed(cfg.seed, "pretrain", 0),
    );
    let mut opt = OptimizerState::zeros(&policy.params);
    let train_cfg = PolicyTrainConfig {
        steps: cfg.policy.pretrain.steps,
        batch_size: cfg.policy.pretrain.batch_size,
        optimizer: cfg.policy.pretrain.optimizer(),
        warmup_steps: 0,
    };
    let schedule = cfg.schedule()?;
    let curve = train_policy(&mut policy, &mut opt, &schedule, &source, &train_cfg, false, 0)?;
    write_loss_log(wd, STAGE_PRETRAIN, &curve)?;
    save_checkpoint(&wd.checkpoint_path(ARM_PRETRAINED), &policy.to_checkpoint(Some(opt)))?;
    manifest.mark_stage(STAGE_PRETRAIN, stamp(cfg));
    wd.save_manifest(&manifest)?;
    let (first_loss, final_loss) = curve_summary(&curve);
    Ok(TrainSummary {
        skipped: false,
        steps: curve.len(),
        first_loss,
        final_loss,
    })
}

/// Post-train a copy of the pretrained policy on `episodes`, writing
/// `checkpoints/<arm>.ckpt`. Weighted runs read clip weights from the
/// manifest and ramp them in over the configured warm-up.
pub fn posttrain_on(
    cfg: &PipelineConfig,
    wd: &Workdir,
    episodes: Vec<Episode>,
    weighted: bool,
    arm: &str,
) -> Result<TrainSummary> {
    let manifest = wd.load_manifest()?;
    let weights = if weighted {
        let mut map: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
        for entry in &manifest.episodes {
            map.insert(
                entry.quality.episode_id.clone(),
                entry.quality.clip_weights.clone(),
            );
        }
        Some(map)
    } else {
        None
    };
    let source = ChunkSource::prepare(episodes, weights.as_ref(), cfg.policy.chunk_len)?;
    let ckpt = load_checkpoint(&wd.checkpoint_path(ARM_PRETRAINED))?;
    let mut policy = Policy::from_checkpoint(&ckpt)?;
    policy.train_seed = derive_seed(cfg.seed, "posttrain", 0);
    let mut opt = OptimizerState::zeros(&policy.params);
    let train_cfg = PolicyTrainConfig {
        steps: cfg.policy.posttrain.steps,
        batch_size: cfg.policy.posttrain.batch_size,
        optimizer: cfg.policy.posttrain.optimizer(),
        warmup_steps: cfg.policy.warmup_steps,
    };
    let schedule = cfg.schedule()?;
    let curve = train_policy(&mut policy, &mut opt, &schedule, &source, &train_cfg, weighted, 0)?;
    write_loss_log(wd, &format!("posttrain_{arm}"), &curve)?;
    save_checkpoint(&wd.checkpoint_path(arm), &policy.to_checkpoint(Some(opt)))?;
    let (first_loss, final_loss) = curve_summary(&curve);
    Ok(TrainSummary {
        skipped: false,
        steps: curve.len(),
        first_loss,
        final_loss,
    })
}

/// The post-training stage: quality-weighted by default, or the vanilla
/// ablation arm with `weighted = false`.
pub fn posttrain(cfg: &PipelineConfig, wd: &Workdir, weighted: bool, force: bool) -> Result<TrainSummary> {
    let mut manifest = wd.load_manifest()?;
    let (stage, required, arm) = if weighted {
        (STAGE_POSTTRAIN, STAGE_SCORE, ARM_WEIGHTED)
    } else {
        (STAGE_POSTTRAIN_VANILLA, STAGE_PRETRAIN, ARM_VANILLA)
    };
    manifest.require_stage(stage, required)?;
    if manifest.has_stage(stage) && !force {
        return Ok(TrainSummary {
            skipped: true,
            steps: cfg.policy.posttrain.steps,
            first_loss: 0.0,
            final_loss: 0.0,
        });
    }
    let episodes = wd.load_episodes(&manifest)?;
    let summary = posttrain_on(cfg, wd, episodes, weighted, arm)?;
    manifest.mark_stage(stage, stamp(cfg));
    wd.save_manifest(&manifest)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// compute-logpi
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct LogpiSummary {
    pub skipped: bool,
    pub clips: usize,
}

/// Deterministic clip starts for one episode.
fn clip_starts_for(cfg: &PipelineConfig, episode: &Episode) -> Result<Vec<usize>> {
    sample_clip_starts(
        episode.len(),
        cfg.discriminator.clips_per_episode,
        cfg.policy.chunk_len,
        derive_seed(cfg.seed, "clips", fnv1a(episode.episode_id.as_bytes())),
    )
}

/// Build every episode's clips, joined with conditioning vectors.
fn build_all_clips(cfg: &PipelineConfig, episodes: &[Episode]) -> Result<Vec<Clip>> {
    let mut clips = Vec::new();
    for episode in episodes {
        let spec = TaskSpec::parse_task_id(&episode.task_id)?;
        let obs = spec.obs_features();
        let instr = instruction_embedding(&episode.instruction);
        let starts = clip_starts_for(cfg, episode)?;
        clips.extend(clips_at(episode, &starts, cfg.policy.chunk_len, &obs, &instr));
    }
    Ok(clips)
}

/// Compute denoising energies under the frozen pretrained policy and the
/// dataset-wide z-scored proxies; persist the clip table.
pub fn compute_logpi(cfg: &PipelineConfig, wd: &Workdir, force: bool) -> Result<LogpiSummary> {
    let mut manifest = wd.load_manifest()?;
    manifest.require_stage(STAGE_COMPUTE_LOGPI, STAGE_PRETRAIN)?;
    if manifest.has_stage(STAGE_COMPUTE_LOGPI) && !force {
        let table: LogpiTable = jsonio::load(&wd.logpi_path())?;
        return Ok(LogpiSummary {
            skipped: true,
            clips: table.entries.len(),
        });
    }
    let episodes = wd.load_episodes(&manifest)?;
    let policy = Policy::from_checkpoint(&load_checkpoint(&wd.checkpoint_path(ARM_PRETRAINED))?)?;
    let schedule = cfg.schedule()?;
    let clips = build_all_clips(cfg, &episodes)?;
    let table = build_logpi_table(&policy, &schedule, &clips, &cfg.discriminator.energy_steps)?;
    jsonio::save(&wd.logpi_path(), &table)?;
    manifest.mark_stage(STAGE_COMPUTE_LOGPI, stamp(cfg));
    wd.save_manifest(&manifest)?;
    Ok(LogpiSummary {
        skipped: false,
        clips: table.entries.len(),
    })
}

/// Clips joined with their stored proxies, in table order.
fn clips_with_proxies(
    cfg: &PipelineConfig,
    episodes: &[Episode],
    table: &LogpiTable,
) -> Result<Vec<Clip>> {
    table.validate_schema()?;
    let by_id: BTreeMap<&str, &Episode> =
        episodes.iter().map(|e| (e.episode_id.as_str(), e)).collect();
    let mut context: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut clips = Vec::with_capacity(table.entries.len());
    for entry in &table.entries {
        let episode = *by_id
            .get(entry.episode_id.as_str())
            .ok_or_else(|| Error::UnknownEpisode(entry.episode_id.clone()))?;
        let (obs, instr) = context
            .entry(entry.episode_id.as_str())
            .or_insert_with(|| {
                let spec = TaskSpec::parse_task_id(&episode.task_id).expect("valid task id");
                (spec.obs_features(), instruction_embedding(&episode.instruction))
            })
            .clone();
        let mut clip = clips_at(episode, &[entry.start], cfg.policy.chunk_len, &obs, &instr)
            .pop()
            .expect("one clip per start");
        clip.logpi_proxy = Some(entry.logpi);
        clips.push(clip);
    }
    Ok(clips)
}

// ---------------------------------------------------------------------------
// train-disc
// ---------------------------------------------------------------------------

/// PU-train the discriminator: positives from replay-validated episodes,
/// everything else unlabeled.
pub fn train_disc(cfg: &PipelineConfig, wd: &Workdir, force: bool) -> Result<TrainSummary> {
    let mut manifest = wd.load_manifest()?;
    manifest.require_stage(STAGE_TRAIN_DISC, STAGE_COMPUTE_LOGPI)?;
    if manifest.has_stage(STAGE_TRAIN_DISC) && !force {
        return Ok(TrainSummary {
            skipped: true,
            steps: cfg.discriminator.train.steps,
            first_loss: 0.0,
            final_loss: 0.0,
        });
    }
    let episodes = wd.load_episodes(&manifest)?;
    let table: LogpiTable = jsonio::load(&wd.logpi_path())?;
    let clips = clips_with_proxies(cfg, &episodes, &table)?;
    let high: std::collections::BTreeSet<&str> = manifest
        .episodes
        .iter()
        .filter(|e| e.quality.in_high_quality)
        .map(|e| e.quality.episode_id.as_str())
        .collect();
    let (positives, unlabeled): (Vec<Clip>, Vec<Clip>) = clips
        .into_iter()
        .partition(|c| high.contains(c.episode_id.as_str()));

    let policy = Policy::from_checkpoint(&load_checkpoint(&wd.checkpoint_path(ARM_PRETRAINED))?)?;
    let mut disc = Discriminator::init(
        cfg.disc_arch()?,
        disc_dims(cfg),
        policy.normalizer.clone(),
        derive_seed(cfg.seed, "disc", 0),
    );
    let train_cfg = DiscTrainConfig {
        steps: cfg.discriminator.train.steps,
        batch_size: cfg.discriminator.train.batch_size,
        optimizer: cfg.discriminator.train.optimizer(),
        eta: cfg.discriminator.eta,
    };
    let curve = train_discriminator(&mut disc, &positives, &unlabeled, &train_cfg)?;
    write_loss_log(wd, STAGE_TRAIN_DISC, &curve)?;
    save_checkpoint(&wd.checkpoint_path("discriminator"), &disc.to_checkpoint(None))?;
    manifest.mark_stage(STAGE_TRAIN_DISC, stamp(cfg));
    wd.save_manifest(&manifest)?;
    let (first_loss, final_loss) = curve_summary(&curve);
    Ok(TrainSummary {
        skipped: false,
        steps: curve.len(),
        first_loss,
        final_loss,
    })
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    pub skipped: bool,
    pub clips: usize,
    pub mean_weight: f64,
}

/// Score every clip, convert to mean-normalized weights, update the
/// manifest atomically.
pub fn score(cfg: &PipelineConfig, wd: &Workdir, force: bool) -> Result<ScoreSummary> {
    let mut manifest = wd.load_manifest()?;
    manifest.require_stage(STAGE_SCORE, STAGE_TRAIN_DISC)?;
    if manifest.has_stage(STAGE_SCORE) && !force {
        let clips = manifest
            .episodes
            .iter()
            .map(|e| e.quality.clip_scores.len())
            .sum();
        return Ok(ScoreSummary {
            skipped: true,
            clips,
            mean_weight: 1.0,
        });
    }
    let episodes = wd.load_episodes(&manifest)?;
    let table: LogpiTable = jsonio::load(&wd.logpi_path())?;
    let clips = clips_with_proxies(cfg, &episodes, &table)?;
    let disc =
        Discriminator::from_checkpoint(&load_checkpoint(&wd.checkpoint_path("discriminator"))?)?;

    let mut scored: Vec<(String, usize, f64)> = Vec::with_capacity(clips.len());
    for clip in &clips {
        let d = disc.score_clip(clip)?;
        scored.push((clip.episode_id.clone(), clip.start, d));
    }
    let weights = WeightTable::from_scores(cfg.discriminator.weight_mapping, &scored)?;

    let mut scores_by_episode: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
    let mut weights_by_episode: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
    for (id, start, d, w) in &weights.entries {
        scores_by_episode.entry(id).or_default().push((*start, *d));
        weights_by_episode.entry(id).or_default().push((*start, *w));
    }
    for entry in &mut manifest.episodes {
        let id = entry.quality.episode_id.clone();
        entry
            .quality
            .set_clip_scores(scores_by_episode.remove(id.as_str()).unwrap_or_default());
        entry
            .quality
            .set_clip_weights(weights_by_episode.remove(id.as_str()).unwrap_or_default());
    }
    let mean_weight =
        weights.entries.iter().map(|(_, _, _, w)| w).sum::<f64>() / weights.entries.len().max(1) as f64;
    manifest.mark_stage(STAGE_SCORE, stamp(cfg));
    wd.save_manifest(&manifest)?;
    Ok(ScoreSummary {
        skipped: false,
        clips: weights.entries.len(),
        mean_weight,
    })
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub skipped: bool,
    pub report: EvalReport,
}

/// Roll out one checkpoint on the configured tasks with paired layout and
/// sampling seeds (identical across arms).
pub fn eval_checkpoint(
    cfg: &PipelineConfig,
    wd: &Workdir,
    arm: &str,
    rollouts: usize,
) -> Result<Vec<EvalRow>> {
    let manifest = wd.load_manifest()?;
    let stats = manifest
        .normalization_stats
        .clone()
        .ok_or_else(|| Error::StageOrderViolation {
            stage: STAGE_EVAL.to_string(),
            requires: STAGE_CURATE.to_string(),
        })?;
    let policy = Policy::from_checkpoint(&load_checkpoint(&wd.checkpoint_path(arm))?)?;
    let mut controller = PolicyController {
        policy,
        schedule: cfg.schedule()?,
    };
    let mut rows = Vec::new();
    for (k_idx, &kind) in cfg.eval.tasks.iter().enumerate() {
        let mut outcomes = Vec::with_capacity(rollouts);
        for i in 0..rollouts {
            let tag = (k_idx * 100_000 + i) as u64;
            let spec = TaskSpec::new(kind, derive_seed(cfg.seed, "eval-layout", tag));
            let outcome = rollout_policy(
                &mut controller,
                &spec,
                &stats,
                derive_seed(cfg.seed, "eval-rollout", tag),
            )?;
            outcomes.push(outcome);
        }
        rows.push(summarize_rollouts(arm, kind.name(), &outcomes));
    }
    Ok(rows)
}

/// Evaluate every arm that has a checkpoint; write report files and plots.
pub fn eval(cfg: &PipelineConfig, wd: &Workdir, force: bool) -> Result<EvalSummary> {
    let mut manifest = wd.load_manifest()?;
    manifest.require_stage(STAGE_EVAL, STAGE_PRETRAIN)?;
    if manifest.has_stage(STAGE_EVAL) && !force {
        return Ok(EvalSummary {
            skipped: true,
            report: crate::pipeline::report::load_report(wd.root())?,
        });
    }
    let mut report = EvalReport::default();
    for arm in [ARM_PRETRAINED, ARM_WEIGHTED, ARM_VANILLA] {
        if wd.checkpoint_path(arm).is_file() {
            report
                .rows
                .extend(eval_checkpoint(cfg, wd, arm, cfg.eval.rollouts_per_task)?);
        }
    }
    if report.rows.is_empty() {
        return Err(Error::MissingCheckpoint(wd.checkpoint_path(ARM_PRETRAINED)));
    }
    save_report(wd.root(), &report)?;
    if cfg.eval.plots {
        write_plots(wd, &report)?;
    }
    manifest.mark_stage(STAGE_EVAL, stamp(cfg));
    wd.save_manifest(&manifest)?;
    Ok(EvalSummary {
        skipped: false,
        report,
    })
}

fn write_plots(wd: &Workdir, report: &EvalReport) -> Result<()> {
    let dir = wd.plots_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tasks: Vec<String> = report.rows.iter().map(|r| r.task.clone()).collect();
    tasks.dedup();
    let arms: Vec<String> = {
        let mut seen = Vec::new();
        for r in &report.rows {
            if !seen.contains(&r.arm) {
                seen.push(r.arm.clone());
            }
        }
        seen
    };
    let collect = |f: &dyn Fn(&EvalRow) -> f64| -> Vec<(String, Vec<f64>)> {
        arms.iter()
            .map(|arm| {
                let vals = tasks
                    .iter()
                    .map(|t| report.row(arm, t).map(f).unwrap_or(0.0))
                    .collect();
                (arm.clone(), vals)
            })
            .collect()
    };
    let charts = [
        ("success_rate.svg", "Success rate", collect(&|r| r.success_rate)),
        ("acceleration.svg", "Mean rollout acceleration", collect(&|r| r.mean_a_ep)),
        ("jerk.svg", "Mean rollout jerk", collect(&|r| r.mean_j_ep)),
    ];
    for (file, title, series) in charts {
        let svg = plot::bar_chart(title, &tasks, &series);
        let path = dir.join(file);
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    }
    // training curves when the logs exist
    let mut curves = Vec::new();
    for stage in [STAGE_PRETRAIN, "posttrain_weighted", "posttrain_vanilla", STAGE_TRAIN_DISC] {
        let path = wd.logs_dir().join(format!("{stage}_loss.jsonl"));
        if let Ok(text) = std::fs::read_to_string(&path) {
            let pts: Vec<(f64, f64)> = text
                .lines()
                .filter_map(|l| serde_json::from_str::<LossPoint>(l).ok())
                .map(|p| (p.step as f64, p.loss))
                .collect();
            if !pts.is_empty() {
                curves.push((stage.to_string(), pts));
            }
        }
    }
    if !curves.is_empty() {
        let svg = plot::line_chart("Training loss", &curves);
        let path = dir.join("loss.svg");
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// stage dispatch (CLI / FFI surface)
// ---------------------------------------------------------------------------

/// Run a stage by CLI name; returns a one-line human summary.
pub fn run_stage(cfg: &PipelineConfig, wd: &Workdir, stage: &str, force: bool) -> Result<String> {
    let line = match stage {
        "gen-corpus" => {
            let s = gen_corpus(cfg, wd, force)?;
            format!(
                "gen-corpus: {} episodes{}",
                s.episodes,
                skipped_tag(s.skipped)
            )
        }
        "curate" => {
            let s = curate(cfg, wd, force)?;
            format!(
                "curate: {} episodes, S_pre {} ({:.1}%), S_high {} ({:.1}%){}\n\
                 reference: the source pipeline retains about 18% after pre-screen and roughly 15% after replay validation",
                s.total,
                s.prescreen_kept,
                100.0 * s.prescreen_fraction(),
                s.high_quality,
                100.0 * s.high_quality_fraction(),
                skipped_tag(s.skipped)
            )
        }
        "pretrain" => {
            let s = pretrain(cfg, wd, force)?;
            train_line("pretrain", &s)
        }
        "compute-logpi" => {
            let s = compute_logpi(cfg, wd, force)?;
            format!("compute-logpi: {} clips{}", s.clips, skipped_tag(s.skipped))
        }
        "train-disc" => {
            let s = train_disc(cfg, wd, force)?;
            train_line("train-disc", &s)
        }
        "score" => {
            let s = score(cfg, wd, force)?;
            format!(
                "score: {} clips scored, mean weight {:.3}{}",
                s.clips,
                s.mean_weight,
                skipped_tag(s.skipped)
            )
        }
        "posttrain" => {
            let s = posttrain(cfg, wd, true, force)?;
            train_line("posttrain", &s)
        }
        "posttrain-vanilla" => {
            let s = posttrain(cfg, wd, false, force)?;
            train_line("posttrain (vanilla)", &s)
        }
        "eval" => {
            let s = eval(cfg, wd, force)?;
            format!("eval:{}\n{}", skipped_tag(s.skipped), s.report.to_table())
        }
        other => {
            return Err(Error::Config(format!(
                "unknown stage {other:?}; expected one of gen-corpus curate pretrain \
                 compute-logpi train-disc score posttrain posttrain-vanilla eval"
            )))
        }
    };
    Ok(line)
}

fn train_line(name: &str, s: &TrainSummary) -> String {
    if s.skipped {
        format!("{name}: skipped (already stamped)")
    } else {
        format!(
            "{name}: {} steps, loss {:.4} -> {:.4}",
            s.steps, s.first_loss, s.final_loss
        )
    }
}

fn skipped_tag(skipped: bool) -> &'static str {
    if skipped {
        " (skipped: already stamped)"
    } else {
        ""
    }
}
