//! File formats and the command-line front end for `lpselect-core`.

pub mod cli;
pub mod error;
pub mod formats;

pub use error::{Error, FormatError, Result};
