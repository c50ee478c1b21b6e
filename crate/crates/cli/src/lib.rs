//! Scenario runner around `spinosc-core`: strict TOML configs, preset
//! parameter sets for the standard scenarios, deterministic CSV emission and
//! a run-to-run comparison report.

pub mod compare;
pub mod config;
pub mod error;
pub mod presets;
pub mod runner;
pub mod table;

pub use config::ScenarioConfig;
pub use error::RunError;
pub use runner::{run_scenario, RunManifest, RunOutcome};
