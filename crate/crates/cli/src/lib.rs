//! Configuration, run directories and reporting for `equiflow`.
//!
//! Every subcommand of the binary is a plain function here (`cmd_run`,
//! `cmd_analyze`, `cmd_verify`, `cmd_sweep`) so that tests drive exactly
//! what the command line does.

pub mod analyze;
pub mod config;
pub mod error;
pub mod plots;
pub mod run;
pub mod verify;

pub use analyze::{cmd_analyze, AnalysisReport, AnalyzeOptions};
pub use config::{parse_config, parse_config_str};
pub use error::{CliError, Result};
pub use run::{cmd_run, cmd_sweep, config_hash, RunManifest, RunOptions};
pub use verify::{cmd_verify, parse_monitors, Monitor, VerifyReport};
