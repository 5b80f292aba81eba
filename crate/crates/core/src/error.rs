use thiserror::Error;

use crate::conic::SolveStatus;

pub type Result<T> = std::result::Result<T, LcvxError>;

#[derive(Debug, Error)]
pub enum LcvxError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigenvalue iteration failed: {0}")]
    EigenFailure(String),

    #[error("matrix is not diagonalizable (cond(Q) = {cond:.3e}); supply an explicit Jordan structure")]
    NotDiagonalizable { cond: f64 },

    #[error("solver finished with status {status:?}{}", context_suffix(.context))]
    Solver {
        status: SolveStatus,
        context: Option<String>,
    },

    #[error("unknown solver backend `{0}`")]
    UnknownBackend(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("missing continuous plant: {0}")]
    MissingPlant(&'static str),
}

fn context_suffix(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" ({c})"),
        None => String::new(),
    }
}
