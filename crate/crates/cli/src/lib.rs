//! Operational surface of the benchmark: configuration files, run
//! directories, plots and summaries.

mod config;
mod error;
mod plot;
mod run;

pub use config::{apply_overrides, load_config, parse_config, to_toml};
pub use error::CliError;
pub use plot::emit_plots;
pub use run::{active_run, mark_interrupted, run, RunManifest, RunStatus, FAILED_MARKER};
