//! Batch front end for `latentcdf`: CSV ingestion, run configuration and the
//! `estimate`, `forecast`, `backtest`, `simulate` and `montecarlo` pipelines.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod output;

pub use commands::Context;
pub use config::RunConfig;
pub use error::{CliError, Result};
