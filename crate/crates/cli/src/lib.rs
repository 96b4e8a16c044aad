//! Command line and HTTP front end for `duet-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod server;

pub use error::CliError;
