use thiserror::Error;

use crate::model::AssumptionReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sequencing error: {0}")]
    Sequencing(String),

    #[error(
        "newton iteration failed after {iterations} iterations (scaled residual {residual:e})"
    )]
    NewtonFailure { iterations: usize, residual: f64 },

    #[error("singular jacobian (estimated reciprocal condition {rcond:e})")]
    SingularJacobian { rcond: f64 },

    #[error("assumption gate refused: {reason}")]
    Refused {
        reason: String,
        report: Box<AssumptionReport>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
