use std::fmt;

use cpi_core::{CpiError, ErrorClass};

pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_VERIFY: i32 = 6;

#[derive(Debug)]
pub enum CliError {
    Core(CpiError),
    Config(String),
    Io(String),
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::Config => EXIT_CONFIG,
                ErrorClass::Numeric => EXIT_NUMERIC,
                ErrorClass::Io => EXIT_IO,
            },
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Verify(_) => EXIT_VERIFY,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(s) => write!(f, "configuration error: {s}"),
            CliError::Io(s) => write!(f, "I/O error: {s}"),
            CliError::Verify(s) => write!(f, "verification failed: {s}"),
        }
    }
}

impl From<CpiError> for CliError {
    fn from(e: CpiError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
