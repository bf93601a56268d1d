use std::path::{Path, PathBuf};

use model_reward::data::DataError;
use model_reward::eval::EvalError;
use model_reward::game::GameError;
use model_reward::models::ModelError;
use model_reward::realize::RealizationError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("input data: {0}")]
    Input(String),
    #[error("numeric: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// 1 for configuration problems, 2 for IO, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io { .. } | CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { path, source } => CliError::Io { path, source },
            DataError::Parse { .. } | DataError::MissingColumn(_) => CliError::Input(e.to_string()),
            DataError::ConstantColumn(_) | DataError::Infeasible(_) => CliError::Config(e.to_string()),
            DataError::Model(m) => m.into(),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidSpec(_) | ModelError::DimensionMismatch(_) | ModelError::InvalidData(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

macro_rules! numeric_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Numeric(e.to_string())
            }
        }
    )*};
}

numeric_from!(GameError, RealizationError, EvalError);
