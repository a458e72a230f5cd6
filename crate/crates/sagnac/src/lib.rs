//! File formats, configuration and command-line front end for
//! [`sagnac_core`].
//!
//! The `sagnac` binary wraps [`commands::run`]; everything it does is also
//! reachable from here for scripting and tests.

pub mod commands;
pub mod config;
pub mod error;
pub mod matrix_io;
pub mod output;
pub mod records;

pub use commands::{run, Command, Outcome, RunManifest};
pub use config::LoadedConfig;
pub use error::{Error, Result};
pub use output::Format;
