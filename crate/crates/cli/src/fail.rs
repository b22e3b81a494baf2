//! Errors carrying the process exit code.

use std::fmt;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Bad flags, config files, or output paths.
    Config,
    /// Unreadable or invalid input data.
    Data,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

pub type CliResult<T> = Result<T, Failure>;

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        match self.kind {
            Kind::Config => ExitCode::from(2),
            Kind::Data => ExitCode::from(3),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self.kind {
            Kind::Config => "config error",
            Kind::Data => "data error",
        };
        write!(f, "{label}: {}", self.message)
    }
}

pub fn config_err(msg: impl fmt::Display) -> Failure {
    Failure {
        kind: Kind::Config,
        message: msg.to_string(),
    }
}

pub fn data_err(msg: impl fmt::Display) -> Failure {
    Failure {
        kind: Kind::Data,
        message: msg.to_string(),
    }
}

impl From<hkmedian::Error> for Failure {
    fn from(e: hkmedian::Error) -> Self {
        if e.is_data_error() {
            data_err(e)
        } else {
            config_err(e)
        }
    }
}
