//! Library side of the `slowsql` command.

pub mod args;
pub mod bench;
pub mod commands;
pub mod config;
pub mod error;

pub use args::Cli;
pub use commands::run;
pub use error::{CliError, CliResult};
