//! Command-line front end for `psgd-core`: CSV ingestion, constraint files,
//! estimator snapshots, experiment configs and parallel Monte Carlo runs.

pub mod commands;
pub mod config;
pub mod constraint_spec;
pub mod data;
pub mod error;
pub mod report;
pub mod runner;
pub mod snapshot;

pub use error::{CliError, Result};
