//! File formats, configuration, the verification harness and subcommand
//! drivers for the `deadoil` command-line tool. Numerics live in
//! `deadoil_core`.

pub mod config;
pub mod error;
pub mod io;
pub mod profile;
pub mod run;
pub mod verify;

pub use config::{parse_config, parse_config_str, RunConfig};
pub use error::{AppError, ExitCode};
pub use verify::VerificationReport;
