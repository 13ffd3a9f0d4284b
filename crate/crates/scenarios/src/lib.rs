//! Scenario files, runner and artifact writer for the `slp` command.

pub mod config;
pub mod error;
pub mod runner;

pub use config::{load_config, parse_config, ScenarioConfig};
pub use error::{ConfigError, RunError};
pub use runner::{output_dir, run_scenario, simulate, RunOptions, RunSummary, Simulation};

/// Directory holding the canned scenario files shipped with the repository.
pub fn canned_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}
