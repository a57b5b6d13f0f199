//! `demoforge-ckpt-v1` checkpoint files.
//!
//! Unlike manifests, checkpoints are machine artifacts: floats are written
//! at full precision (shortest round-trip decimal) so save/load is bit-exact.
//! Training randomness is derived per step from `train_seed`, so the seed
//! plus the optimizer step counter fully captures the RNG state.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::adamw::OptimizerState;
use crate::nn::tape::ParamSet;

pub const CKPT_SCHEMA: &str = "demoforge-ckpt-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub kind: RngKind,
    pub train_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RngKind {
    DerivedChacha20,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Model-specific architecture descriptor.
    pub arch: serde_json::Value,
    pub params: ParamSet,
    pub opt: Option<OptimizerState>,
    pub rng: RngState,
    /// Model-specific extras (action normalizer, instruction dims, ...).
    pub aux: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    schema: String,
    arch: serde_json::Value,
    /// Ordered (name, tensor) pairs; order defines optimizer-state alignment.
    params: Vec<(String, Mat)>,
    opt: Option<OptimizerState>,
    rng: RngState,
    aux: serde_json::Value,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let file = CheckpointFile {
        schema: CKPT_SCHEMA.to_string(),
        arch: ckpt.arch.clone(),
        params: ckpt
            .params
            .names()
            .iter()
            .cloned()
            .zip(ckpt.params.tensors().iter().cloned())
            .collect(),
        opt: ckpt.opt.clone(),
        rng: ckpt.rng,
        aux: ckpt.aux.clone(),
    };
    let text = serde_json::to_string(&file)
        .map_err(|e| Error::NonFinite(format!("checkpoint {}: {e}", path.display())))?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.is_file() {
        return Err(Error::MissingCheckpoint(path.to_path_buf()));
    }
    let file: CheckpointFile = crate::jsonio::load(path)?;
    if file.schema != CKPT_SCHEMA {
        return Err(Error::SchemaMismatch {
            expected: CKPT_SCHEMA.to_string(),
            found: file.schema,
        });
    }
    let mut params = ParamSet::new();
    for (name, tensor) in file.params {
        params.insert(name, tensor);
    }
    Ok(Checkpoint {
        arch: file.arch,
        params,
        opt: file.opt,
        rng: file.rng,
        aux: file.aux,
    })
}
