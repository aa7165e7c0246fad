//! Files and command line for [`featorder_core`]: CSV ingestion, report,
//! permutation and checkpoint formats, and the `featorder` binary's
//! `analyze`, `order` and `train` commands.

pub mod cli;
pub mod error;
pub mod io;
pub mod report;

pub use error::{exit, CliError, Result};
