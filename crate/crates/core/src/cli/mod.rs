//! Experiment runner: TOML configs, canned recipes, CSV/JSON artifacts.

pub mod config;
pub mod probes;
pub mod recipes;
pub mod run;

pub use config::ExperimentConfig;
pub use recipes::{Recipe, RECIPES};
pub use run::{exit_code, load_config, run, Overrides, RunOutcome};
