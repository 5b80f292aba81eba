use lcvx::LcvxError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Core(#[from] LcvxError),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for bad input, 3 for solver failures, 4 for violated assumptions.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(LcvxError::Solver { .. }) => 3,
            CliError::Core(LcvxError::Assumption(_) | LcvxError::MissingPlant(_)) => 4,
            _ => 2,
        }
    }
}
