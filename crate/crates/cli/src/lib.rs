//! Command-line workflows and the HTTP API around the `rollaid` library.
//!
//! The binary is a thin shell: every number it prints or serves comes from a
//! library call on the loaded model, with no arithmetic of its own.

pub mod commands;
pub mod error;
pub mod files;
pub mod service;

pub use error::{CliError, CliResult, EXIT_IO, EXIT_OK, EXIT_VALIDATION};
