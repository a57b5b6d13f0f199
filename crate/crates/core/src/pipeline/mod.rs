//! Pipeline orchestration: configuration, stages, reports, plots.

pub mod config;
pub mod plot;
pub mod report;
pub mod stages;

pub use config::PipelineConfig;
pub use report::{EvalReport, EvalRow};
pub use stages::{run_stage, Workdir};
