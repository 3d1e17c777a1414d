//! Command-line front end for the `hypervis-core` experiments.
//!
//! Settings come from a JSON config file, then `HYPERVIS_*` environment
//! variables, then flags, each overriding the previous.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod run;

pub use error::CliError;
pub use run::{execute, main_entry, Cli, VERSION};
