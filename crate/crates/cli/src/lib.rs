// SPDX-License-Identifier: Apache-2.0

//! Scenario runner for the `epiq` library.
//!
//! A scenario is a JSON file (see `schema/scenario.schema.json`) naming a
//! state space, an evolution rule, a context network, Hilbert-space inputs
//! or a uniqueness grid. [`run`] dispatches one command over it and returns
//! a [`RunResult`] that can be written as CSV and JSON.

pub mod output;
mod run;
pub mod scenario;

use thiserror::Error;

pub use output::{Cell, Check, RunResult, Table};
pub use run::{run, run_file, Overrides, DEFAULT_N, DEFAULT_TOLERANCE};
pub use scenario::{load_scenario, parse_scenario, Command, Scenario};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "EPIQ_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "epiq-out";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{0}")]
    Domain(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for schema violations, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Domain(_) | CliError::Io(_) => 1,
        }
    }
}
