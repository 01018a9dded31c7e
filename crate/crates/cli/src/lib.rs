//! File formats, configuration and the run driver for `psmaddpg-core`.

pub mod config;
pub mod error;
pub mod metrics;
pub mod netio;
pub mod run;
pub mod structural;

pub use config::{parse_config, RunSpec};
pub use error::CliError;
pub use run::{run, run_seeds, Mode};
