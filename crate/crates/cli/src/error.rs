use std::fmt;

use cmtorsion::Error;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    /// A mathematical check or tolerance policy failed.
    Failure = 1,
    Parse = 2,
    CutCollision = 3,
    Infeasible = 4,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Parse, message)
    }

    pub fn failure(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Failure, message)
    }

    pub fn with_detail(mut self, detail: impl AsRef<str>) -> Self {
        self.message.push_str("; ");
        self.message.push_str(detail.as_ref());
        self
    }

    /// Errors raised while building a model from user parameters.
    pub fn generator(e: Error) -> Self {
        match e {
            Error::Contract(_) | Error::Shape(_) => Self::parse(e.to_string()),
            _ => Self::new(ExitCode::Infeasible, e.to_string()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::CutCollision { .. } | Error::AgmonCollision { .. } => ExitCode::CutCollision,
            Error::Infeasible(_) => ExitCode::Infeasible,
            _ => ExitCode::Failure,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::failure(format!("i/o error: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}
