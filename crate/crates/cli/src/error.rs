use std::path::Path;

use classe_core::netlist::{JsonError, TemplateError};
use classe_core::rf::RfError;
use classe_core::transient::SimError;
use classe_core::tuning::TuneError;
use thiserror::Error;

/// Command failure, grouped by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation or unreadable/unwritable file. Exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Inputs that parse but violate a rule. Exit code 2.
    #[error("{message}")]
    Validation { field: Option<String>, message: String },
    /// Engine failure on valid inputs. Exit code 3.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn flag(name: &str, message: impl std::fmt::Display) -> Self {
        CliError::Validation { field: Some(name.to_string()), message: format!("{name}: {message}") }
    }

    fn validation(message: impl std::fmt::Display) -> Self {
        CliError::Validation { field: None, message: message.to_string() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Usage(format!("{}: {e}", path.display()))
    }
}

impl From<JsonError> for CliError {
    fn from(e: JsonError) -> Self {
        CliError::validation(e)
    }
}

impl From<TemplateError> for CliError {
    fn from(e: TemplateError) -> Self {
        match e {
            TemplateError::Analysis(e) => e.into(),
            e => CliError::validation(e),
        }
    }
}

impl From<RfError> for CliError {
    fn from(e: RfError) -> Self {
        match e {
            RfError::Grid(_) | RfError::Range(_) | RfError::PortCount { .. } | RfError::Unsupported(_) => {
                CliError::validation(e)
            }
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) | SimError::Unsupported(_) => CliError::validation(e),
            SimError::Analysis(e) => e.into(),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<TuneError> for CliError {
    fn from(e: TuneError) -> Self {
        match e {
            TuneError::Invalid { field, .. } => CliError::Validation { field: Some(field.to_string()), message: e.to_string() },
            TuneError::Analysis(e) => e.into(),
            TuneError::Simulation(e) => e.into(),
            TuneError::Template(e) => e.into(),
            e => CliError::validation(e),
        }
    }
}
