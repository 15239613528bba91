use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(hhdmft_core::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: hhdmft_core::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn stage(stage: &'static str) -> impl FnOnce(hhdmft_core::Error) -> CliError {
        move |source| CliError::Stage { stage, source }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// 2 for configuration problems, 3 for numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage {
                source: hhdmft_core::Error::Config { .. },
                ..
            } => 2,
            CliError::Stage { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
