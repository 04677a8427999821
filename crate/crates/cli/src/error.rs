use std::path::PathBuf;

use mpg_core::game::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid game: {0}")]
    Validation(ValidationReport),
    #[error("{0}")]
    Input(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
}

impl CliError {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::NonConvergence(_) => 4,
            _ => 2,
        }
    }
}

impl From<mpg_core::Error> for CliError {
    fn from(e: mpg_core::Error) -> Self {
        match e {
            mpg_core::Error::InvalidGame(report) => CliError::Validation(report),
            mpg_core::Error::NonConvergence { .. } | mpg_core::Error::LinearSolve(_) => {
                CliError::NonConvergence(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}
