//! Quality discriminator: clip sampling, denoising-energy log-pi proxies,
//! PU training, scoring, and score-to-weight conversion.

pub mod clip;
pub mod energy;
pub mod model;
pub mod train;
pub mod weight;

pub use clip::{clips_at, sample_clip_starts, Clip};
pub use energy::{
    build_logpi_table, residual_energy, zscore_logpi, LogpiEntry, LogpiTable, DEFAULT_STEP_SET,
};
pub use model::{DiscDims, Discriminator, SCORE_MAX, SCORE_MIN};
pub use train::{
    pu_loss, pu_loss_with_grads, ranking_auc, train_discriminator, DiscTrainConfig, PU_ETA,
};
pub use weight::{normalize_mean_one, score_to_weight, WeightMapping, WeightTable};
