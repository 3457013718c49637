// SPDX-License-Identifier: Apache-2.0

//! Command-line driver and file formats for `mwjoin-core`.
//!
//! Everything deterministic lives in the core crate; this crate reads and
//! writes CSV and JSON and maps errors to exit codes (2 for an infeasible
//! plan, 1 otherwise).

pub mod cli;
pub mod commands;
mod error;
pub mod io;
pub mod spec;

pub use error::{CliError, Result};
