//! Dataset manifests: the persistent index connecting all pipeline stages.
//!
//! The manifest owns per-episode [`QualityRecord`]s and a set of stage
//! markers. Stage ownership is strict: the metrics stage fills `a_ep` /
//! `j_ep` / `coverage`, curation fills the membership flags, and the
//! discriminator stage fills clip scores and weights. Later stages never
//! rewrite earlier stages' fields.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonio;
use crate::metrics::NormalizationStats;
use crate::util::round_sig12;

pub const MANIFEST_SCHEMA: &str = "demoforge-manifest-v1";

/// Summary of the training weights assigned to an episode's clips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Everything the pipeline knows about one episode's quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRecord {
    pub episode_id: String,
    pub a_ep: Option<f64>,
    pub j_ep: Option<f64>,
    pub coverage: Option<f64>,
    #[serde(default)]
    pub in_prescreen: bool,
    /// `None` until replay validation has run for this episode.
    pub replay_success: Option<bool>,
    pub collision_free: Option<bool>,
    #[serde(default)]
    pub in_high_quality: bool,
    /// (clip start index, discriminator score in [0.1, 0.9]).
    #[serde(default)]
    pub clip_scores: Vec<(usize, f64)>,
    /// (clip start index, training weight), mean-normalized over the dataset.
    #[serde(default)]
    pub clip_weights: Vec<(usize, f64)>,
    pub episode_score: Option<f64>,
    pub weight_stats: Option<WeightStats>,
}

impl QualityRecord {
    pub fn new(episode_id: impl Into<String>) -> Self {
        QualityRecord {
            episode_id: episode_id.into(),
            a_ep: None,
            j_ep: None,
            coverage: None,
            in_prescreen: false,
            replay_success: None,
            collision_free: None,
            in_high_quality: false,
            clip_scores: Vec::new(),
            clip_weights: Vec::new(),
            episode_score: None,
            weight_stats: None,
        }
    }

    fn recompute_high_quality(&mut self) {
        self.in_high_quality = self.in_prescreen
            && self.replay_success == Some(true)
            && self.collision_free == Some(true);
    }

    /// Store clip scores and the mean episode score (rounded like every
    /// serialized float).
    pub fn set_clip_scores(&mut self, scores: Vec<(usize, f64)>) {
        let mean = scores.iter().map(|(_, d)| d).sum::<f64>() / scores.len().max(1) as f64;
        self.episode_score = if scores.is_empty() {
            None
        } else {
            Some(round_sig12(mean))
        };
        self.clip_scores = scores
            .into_iter()
            .map(|(s, d)| (s, round_sig12(d)))
            .collect();
    }

    pub fn set_clip_weights(&mut self, weights: Vec<(usize, f64)>) {
        if weights.is_empty() {
            self.clip_weights = Vec::new();
            self.weight_stats = None;
            return;
        }
        let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for &(_, w) in &weights {
            lo = lo.min(w);
            hi = hi.max(w);
            sum += w;
        }
        self.weight_stats = Some(WeightStats {
            mean: round_sig12(sum / weights.len() as f64),
            min: round_sig12(lo),
            max: round_sig12(hi),
        });
        self.clip_weights = weights
            .into_iter()
            .map(|(s, w)| (s, round_sig12(w)))
            .collect();
    }
}

/// Stamp written when a stage completes; downstream stages check for it.
/// Contains nothing time-dependent so repeated runs produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStamp {
    pub seed: u64,
    pub config_digest: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Episode file path, relative to the manifest's directory.
    pub path: String,
    pub quality: QualityRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(rename = "schema")]
    pub schema_version: String,
    pub dataset_id: String,
    pub normalization_stats: Option<NormalizationStats>,
    pub config_snapshot: serde_json::Value,
    #[serde(default)]
    pub stages: BTreeMap<String, StageStamp>,
    pub episodes: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(dataset_id: impl Into<String>, config_snapshot: serde_json::Value) -> Self {
        DatasetManifest {
            schema_version: MANIFEST_SCHEMA.to_string(),
            dataset_id: dataset_id.into(),
            normalization_stats: None,
            config_snapshot,
            stages: BTreeMap::new(),
            episodes: Vec::new(),
        }
    }

    pub fn record(&self, episode_id: &str) -> Option<&QualityRecord> {
        self.episodes
            .iter()
            .find(|e| e.quality.episode_id == episode_id)
            .map(|e| &e.quality)
    }

    pub fn record_mut(&mut self, episode_id: &str) -> Option<&mut QualityRecord> {
        self.episodes
            .iter_mut()
            .find(|e| e.quality.episode_id == episode_id)
            .map(|e| &mut e.quality)
    }

    pub fn has_stage(&self, stage: &str) -> bool {
        self.stages.contains_key(stage)
    }

    pub fn require_stage(&self, current: &str, required: &str) -> Result<()> {
        if self.has_stage(required) {
            Ok(())
        } else {
            Err(Error::StageOrderViolation {
                stage: current.to_string(),
                requires: required.to_string(),
            })
        }
    }

    pub fn mark_stage(&mut self, stage: &str, stamp: StageStamp) {
        self.stages.insert(stage.to_string(), stamp);
    }
}

/// Lowest-`fraction` episodes by `key` with deterministic episode-id
/// tie-break. Returns `floor(fraction * N)` ids.
fn lowest_fraction_by<'a>(
    records: &'a [QualityRecord],
    fraction: f64,
    key: impl Fn(&QualityRecord) -> f64,
) -> BTreeSet<&'a str> {
    let mut order: Vec<(&QualityRecord, f64)> = records.iter().map(|r| (r, key(r))).collect();
    order.sort_by(|(ra, ka), (rb, kb)| {
        ka.total_cmp(kb)
            .then_with(|| ra.episode_id.cmp(&rb.episode_id))
    });
    let keep = (fraction * records.len() as f64).floor() as usize;
    order
        .into_iter()
        .take(keep)
        .map(|(r, _)| r.episode_id.as_str())
        .collect()
}

/// Pre-screen set: intersection of the lowest-`fraction` episodes by A_ep
/// and by J_ep, restricted to episodes whose coverage clears `coverage_min`.
/// Sets `in_prescreen` on every record.
pub fn prescreen(
    records: &mut [QualityRecord],
    fraction: f64,
    coverage_min: f64,
) -> Result<BTreeSet<String>> {
    if records.is_empty() {
        return Err(Error::EmptyDataset("prescreen".into()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "prescreen fraction must lie in (0,1), got {fraction}"
        )));
    }
    for r in records.iter() {
        if r.a_ep.is_none() || r.j_ep.is_none() || r.coverage.is_none() {
            return Err(Error::Config(format!(
                "episode {} has no smoothness metrics; run the metrics stage first",
                r.episode_id
            )));
        }
    }
    let low_a = lowest_fraction_by(records, fraction, |r| r.a_ep.unwrap());
    let low_j = lowest_fraction_by(records, fraction, |r| r.j_ep.unwrap());
    let selected: BTreeSet<String> = records
        .iter()
        .filter(|r| {
            r.coverage.unwrap() >= coverage_min
                && low_a.contains(r.episode_id.as_str())
                && low_j.contains(r.episode_id.as_str())
        })
        .map(|r| r.episode_id.clone())
        .collect();
    for r in records.iter_mut() {
        r.in_prescreen = selected.contains(&r.episode_id);
        r.recompute_high_quality();
    }
    Ok(selected)
}

/// Outcome of one open-loop replay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub success: bool,
    pub collision_free: bool,
}

/// Record a replay outcome; only pre-screened episodes are replay-validated.
pub fn record_replay(record: &mut QualityRecord, outcome: ReplayOutcome) -> Result<()> {
    if !record.in_prescreen {
        return Err(Error::ReplayOnNonPrescreened(record.episode_id.clone()));
    }
    record.replay_success = Some(outcome.success);
    record.collision_free = Some(outcome.collision_free);
    record.recompute_high_quality();
    Ok(())
}

pub fn save_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let mut seen = BTreeSet::new();
    for entry in &manifest.episodes {
        if !seen.insert(entry.quality.episode_id.as_str()) {
            return Err(Error::Config(format!(
                "duplicate episode id {} in manifest",
                entry.quality.episode_id
            )));
        }
    }
    jsonio::save(path, manifest)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let manifest: DatasetManifest = jsonio::load(path)?;
    if manifest.schema_version != MANIFEST_SCHEMA {
        return Err(Error::SchemaMismatch {
            expected: MANIFEST_SCHEMA.to_string(),
            found: manifest.schema_version,
        });
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for entry in &manifest.episodes {
        let ep_path = base.join(&entry.path);
        if !ep_path.is_file() {
            return Err(Error::MissingEpisodeFile(ep_path));
        }
    }
    Ok(manifest)
}

/// Resolve an entry's episode path against the manifest location.
pub fn episode_path(manifest_path: &Path, entry: &ManifestEntry) -> PathBuf {
    manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&entry.path)
}
