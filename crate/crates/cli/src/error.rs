//! Error type with stable process exit codes:
//! 2 — configuration problems, 3 — file I/O, 4 — numeric failures.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, malformed config/checkpoint, impossible world setup.
    Config(String),
    /// Filesystem and serialization-of-bytes failures.
    Io(String),
    /// Non-finite values, divergence, failed numeric checks.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError::Io(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        CliError::Numeric(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<slotnav_core::trainer::TrainError> for CliError {
    fn from(e: slotnav_core::trainer::TrainError) -> Self {
        use slotnav_core::trainer::TrainError;
        match e {
            TrainError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<slotnav_core::evalkit::EvalError> for CliError {
    fn from(e: slotnav_core::evalkit::EvalError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<slotnav_core::worldsim::GenError> for CliError {
    fn from(e: slotnav_core::worldsim::GenError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<slotnav_core::encoders::EncodeError> for CliError {
    fn from(e: slotnav_core::encoders::EncodeError) -> Self {
        CliError::Config(e.to_string())
    }
}
