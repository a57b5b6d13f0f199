//! Crate-wide error type.
//!
//! One enum covers every failure surfaced by the pipeline so that the CLI
//! and the C ABI can map errors onto stable exit/status codes.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // --- dataset / metrics ---
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimMismatch {
        expected: usize,
        got: usize,
        context: String,
    },
    #[error("episode too short: T={got}, need at least {min} samples")]
    TooShort { got: usize, min: usize },

    // --- manifests ---
    #[error("schema mismatch: expected {expected:?}, found {found:?}")]
    SchemaMismatch { expected: String, found: String },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("manifest references missing episode file {0}")]
    MissingEpisodeFile(PathBuf),
    #[error("replay outcome recorded for episode {0} which is not in the pre-screen set")]
    ReplayOnNonPrescreened(String),
    #[error("unknown episode id {0}")]
    UnknownEpisode(String),

    // --- simulator ---
    #[error("episode task {episode_task} does not match spec task {spec_task}")]
    TaskMismatch {
        episode_task: String,
        spec_task: String,
    },
    #[error("non-finite action at step {0}")]
    NonFiniteAction(usize),

    // --- tensors / training ---
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward called on non-scalar node of shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("diffusion step {got} outside schedule range 1..={max}")]
    StepOutOfRange { got: usize, max: usize },
    #[error("negative training weight {0}")]
    NegativeWeight(f64),
    #[error("checkpoint not found: {0}")]
    MissingCheckpoint(PathBuf),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    // --- discriminator ---
    #[error("chunk length {chunk} exceeds episode length {episode}")]
    ChunkLongerThanEpisode { chunk: usize, episode: usize },
    #[error("z-score requires at least 2 clips, got {0}")]
    SingleClip(usize),
    #[error("PU batch has an empty {0} side")]
    EmptyBatchSide(&'static str),
    #[error("no positive episodes marked high-quality; cannot train discriminator")]
    NoPositives,
    #[error("score {0} outside [0.1, 0.9]")]
    ScoreOutOfRange(f64),
    #[error("episode {0} has no clip weights; run the scoring stage or pass --no-weights")]
    MissingWeights(String),

    // --- pipeline / CLI ---
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage order violation: {stage} requires {requires} to have run first")]
    StageOrderViolation {
        stage: String,
        requires: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 stage order, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 2,
            Error::StageOrderViolation { .. } => 3,
            Error::NonFinite(_) | Error::NonFiniteAction(_) => 4,
            _ => 1,
        }
    }
}
