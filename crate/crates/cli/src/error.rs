use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the command line, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent configuration (exit code 2).
    #[error("config error: {0}")]
    Config(String),
    /// A pipeline stage failed on valid configuration (exit code 3).
    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: pacdp_core::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Tags a core error with the stage that produced it.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
    /// Validation failures of user-supplied settings are configuration errors.
    fn config(self) -> Result<T, CliError>;
}

impl<T> StageExt<T> for pacdp_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }

    fn config(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Config(e.to_string()))
    }
}
