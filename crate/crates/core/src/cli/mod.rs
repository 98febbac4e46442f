//! Command-line front end: configuration, validation, runs and output.
//!
//! A run is described by a [`RunConfig`], assembled from an optional flat
//! `key = value` file, an optional named preset and command-line flags, in
//! increasing priority.

mod config;
mod output;
mod run;

pub use config::{
    parse_config_file, Cli, Diagnostic, Format, MethodChoice, Mode, OrderRange, RawConfig, RunConfig,
    Severity, OUTPUT_DIR_ENV,
};
pub use output::{emit, render, Table};
pub use run::{run, RunOutcome, CROSS_CHECK_TOLERANCE, DEFAULT_MC_SAMPLES};

use crate::error::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const IO: i32 = 4;
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::ConvergenceDomain(_) | Error::DimensionMismatch { .. } => {
            exit::CONFIG
        }
        Error::Accuracy { .. }
        | Error::NonConvergence { .. }
        | Error::StepUnderflow(_)
        | Error::SingularPoint { .. }
        | Error::InvalidState(_) => exit::NUMERICAL,
    }
}
