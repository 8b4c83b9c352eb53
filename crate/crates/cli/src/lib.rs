//! The `sncv` command-line tool: synthetic data generation, cross-fold
//! scoring, selection and the experiment reports built on `sncv-core`.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
