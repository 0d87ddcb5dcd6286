use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("model contract violated: {0}")]
    Contract(#[source] urnlab_core::Error),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 for model-contract
    /// violations, 4 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) | HarnessError::Parse(_) | HarnessError::Json(_) => 2,
            HarnessError::Contract(_) => 3,
            HarnessError::Io { .. } | HarnessError::Csv(_) | HarnessError::Pool(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }
}

/// Core errors raised while building a model from configuration: an
/// irreducibility failure breaks the model contract, anything else is a bad
/// parameter.
pub(crate) fn from_setup(err: urnlab_core::Error) -> HarnessError {
    match err {
        urnlab_core::Error::NotIrreducible => HarnessError::Contract(err),
        other => HarnessError::Config(other.to_string()),
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
