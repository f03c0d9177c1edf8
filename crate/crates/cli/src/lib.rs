//! Command-line front end and local HTTP service for the class-E PA
//! toolkit.

pub mod commands;
pub mod error;
pub mod service;
pub mod summary;

pub use commands::{run, Cli};
pub use error::CliError;
