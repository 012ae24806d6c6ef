//! File formats and the `topocons` command line on top of `topocons-core`.

pub mod cli;
mod error;
pub mod format;
pub mod io;

pub use error::{Error, Result};
