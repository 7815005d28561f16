//! Configuration, experiment orchestration and acceptance suites for the
//! `qlwave` command-line tool.

pub mod config;
pub mod experiment;
pub mod suites;

pub use config::{ConfigError, Mode, RunConfig};
pub use experiment::{run_config_file, run_experiment, Outcome, RunError, Status, Verdict};
pub use suites::{Acceptance, SuiteResult, UnknownSuite, SUITES};
