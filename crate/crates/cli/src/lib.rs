//! Library half of the `redcohort` binary. The subcommands live in
//! [`commands`]; [`config`] and [`store`] hold the pipeline configuration
//! and the on-disk corpus store they share.

pub mod commands;
pub mod config;
pub mod error;
pub mod store;

pub use error::CliError;
