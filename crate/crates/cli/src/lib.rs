//! Library half of the `gzsl` command-line harness: configuration, file
//! formats, and the experiment pipeline. The binary in `main.rs` is a thin
//! dispatcher over these modules.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

pub use error::{CliError, Result};
