//! Command-line front end: document format, run configuration, commands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod document;
pub mod error;
pub mod jsonfmt;

pub use cli::run;
pub use document::ComplexDocument;
pub use error::{CliError, ExitCode};
