//! Command-line pipeline and HTTP service for delay-propagation networks.

pub mod commands;
pub mod plot;
pub mod service;

use sha2::{Digest, Sha256};

/// Failure of a subcommand, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or unreadable input path; exit status 1.
    Usage(String),
    /// Input that was read but is invalid, or a failed computation; exit status 2.
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<delayprop_core::Error> for CliError {
    fn from(e: delayprop_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Hex SHA-256 of `bytes`.
pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
