//! Configuration, file formats and command pipelines for the `vpme` binary.

pub mod audit;
pub mod config;
pub mod error;
pub mod io;
pub mod run;

pub use config::{load_config, parse_config, RunConfig, RunMode};
pub use error::{CliError, Result};
