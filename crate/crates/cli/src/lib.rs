//! Configuration loading, subcommand dispatch and output writing for the
//! `rabi-xuv` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{execute, Command, Invocation, MANIFEST_NAME};
pub use config::RunConfig;
pub use error::CliError;
