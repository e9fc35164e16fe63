use std::fmt;
use std::process::ExitCode;

use panosplat::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Io,
    Numerical,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Usage => 2,
            Kind::Io => 3,
            Kind::Numerical => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { kind: Kind::Usage, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { kind: Kind::Io, message: message.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind.exit_code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::Contract(_) | Error::Empty(_) => Kind::Usage,
            Error::Format(_) | Error::Io(_) => Kind::Io,
            Error::Degenerate(_) | Error::NonFiniteGradient { .. } | Error::NonFiniteLoss { .. } => Kind::Numerical,
        };
        CliError { kind, message: e.to_string() }
    }
}

/// Attaches a path to I/O failures.
pub trait IoContext<T> {
    fn at(self, path: &std::path::Path) -> CliResult<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: &std::path::Path) -> CliResult<T> {
        self.map_err(|e| CliError::io(format!("{}: {e}", path.display())))
    }
}

impl<T> IoContext<T> for panosplat::Result<T> {
    fn at(self, path: &std::path::Path) -> CliResult<T> {
        self.map_err(|e| {
            let mut err = CliError::from(e);
            err.message = format!("{}: {}", path.display(), err.message);
            err
        })
    }
}
