use std::process::ExitCode;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),
    #[error("monotonicity violated: {0}")]
    Monotonicity(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Monotonicity(_) => 5,
        })
    }

    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    /// Library errors: data problems exit 3, anything else is a caller mistake.
    pub fn from_lib(e: ratemig::Error) -> Self {
        if e.is_data_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }

    /// Errors while reading an input file: a missing file is a configuration
    /// problem, anything wrong with its contents is a data problem.
    pub fn reading(path: &str, e: ratemig::Error) -> Self {
        match &e {
            ratemig::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                CliError::Config(format!("{path}: file not found"))
            }
            ratemig::Error::Io(_) => CliError::Config(format!("{path}: {e}")),
            _ => CliError::Data(format!("{path}: {e}")),
        }
    }
}
