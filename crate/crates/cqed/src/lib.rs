//! Std companion of `cqed-core`: parameter and pulse files, CSV/JSON
//! exports, a rayon-backed executor, resumable landscape scans and the
//! `cqed` command line.

pub mod cli;
pub mod error;
pub mod exec;
pub mod format;
pub mod landscape;
pub mod params;
pub mod pulse_io;
pub mod store;

pub use error::{CliError, FormatError};
