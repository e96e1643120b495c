//! Experiment harness: TOML specs, drivers and report files.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{load_config, parse_config, ConfigError, ExperimentKind, ExperimentSpec};
pub use experiments::run_experiment;
pub use report::{emit_reports, Check, Report};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] fene_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}
