//! Files, configs and subcommands around `mccs-core`.
//!
//! The `mccs` binary is a thin clap front end over [`commands`]; everything
//! it writes goes through [`formats`].

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use error::{CliError, CliResult};
