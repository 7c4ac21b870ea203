//! Failure classes and their exit codes.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Invalid or missing configuration; exit 2.
    Config(String),
    /// A numerical routine failed; exit 3.
    Numerical(String),
    /// A required check failed; exit 4.
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<alphapred_core::Error> for CliError {
    fn from(e: alphapred_core::Error) -> Self {
        match e {
            alphapred_core::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
