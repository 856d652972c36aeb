//! Pipeline commands behind the `oddsmix` binary.

use std::path::Path;

use thiserror::Error;

pub mod commands;
pub mod config;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Convergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Convergence(_) => 3,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<oddsmix::data::DataError> for CliError {
    fn from(e: oddsmix::data::DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<oddsmix::mcmc::McmcError> for CliError {
    fn from(e: oddsmix::mcmc::McmcError) -> Self {
        match e {
            oddsmix::mcmc::McmcError::Config(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<oddsmix::predict::PredictError> for CliError {
    fn from(e: oddsmix::predict::PredictError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<oddsmix::betting::BettingError> for CliError {
    fn from(e: oddsmix::betting::BettingError) -> Self {
        CliError::Data(e.to_string())
    }
}
