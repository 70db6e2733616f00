use std::fmt;

use crate::config::Diagnostic;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration.
    Config { message: String, line: Option<usize> },
    /// Static checks found errors.
    Invalid(Vec<Diagnostic>),
    /// A basis file whose columns are not orthonormal.
    Basis(String),
    Core(aqec_core::Error),
    Io(String),
}

impl CliError {
    pub fn config(message: impl Into<String>, line: Option<usize>) -> Self {
        CliError::Config {
            message: message.into(),
            line,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Invalid(_) => 2,
            CliError::Core(aqec_core::Error::Input(_)) => 2,
            CliError::Core(aqec_core::Error::Capacity { .. }) => 3,
            CliError::Core(aqec_core::Error::Precondition { .. }) | CliError::Basis(_) => 4,
            CliError::Core(aqec_core::Error::Numerical(_)) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { message, line: Some(l) } => write!(f, "invalid config (line {l}): {message}"),
            CliError::Config { message, line: None } => write!(f, "invalid config: {message}"),
            CliError::Invalid(diags) => {
                write!(f, "invalid config:")?;
                for d in diags {
                    write!(f, "\n  {d}")?;
                }
                Ok(())
            }
            CliError::Basis(m) => write!(f, "precondition failed: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<aqec_core::Error> for CliError {
    fn from(e: aqec_core::Error) -> Self {
        CliError::Core(e)
    }
}
