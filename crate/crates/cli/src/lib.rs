#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Command-line front end: game and policy documents, reports, traces and
//! the `mpg` subcommands.

pub mod commands;
pub mod document;
mod error;
pub mod report;
pub mod trace;

pub use commands::run;
pub use error::CliError;
