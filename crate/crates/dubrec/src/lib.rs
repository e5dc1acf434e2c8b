//! File formats, data loaders and the `dubrec` command-line driver built on
//! `dubrec-core`.

#![warn(missing_debug_implementations, rust_2018_idioms)]

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod load;
pub mod output;
pub mod run;
pub mod world_io;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
