use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error in {path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("fit did not converge after {iterations} iterations (chi2 = {chi2:e}); outputs were written")]
    NotConverged { iterations: usize, chi2: f64 },

    #[error(transparent)]
    Model(#[from] tls_resonator::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data { .. } => 3,
            CliError::NotConverged { .. } => 4,
            CliError::Model(e) => match e {
                tls_resonator::Error::InvalidInput(_)
                | tls_resonator::Error::MarkovWindow { .. }
                | tls_resonator::Error::PairBreaking { .. } => 2,
                tls_resonator::Error::Fit(_) => 4,
                _ => 3,
            },
            CliError::Io { .. } => 3,
        }
    }

    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
