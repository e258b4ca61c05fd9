//! Experiment harness for the `smoothlot` library: a TOML run configuration,
//! one command per invocation, and CSV/JSON artifacts in an output
//! directory.

mod commands;
mod config;
mod output;

pub use commands::{run_command, Command};
pub use config::{
    BoundsConfig, BudgetConfig, DataConfig, ExpostConfig, GridConfig, MechanismConfig, MechanismKind, Overrides,
    PerturbConfig, RunConfig, SampleConfig, SweepConfig, TightnessConfig,
};
pub use output::{write_atomic, DIGITS};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("config syntax: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Core(#[from] smoothlot::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
