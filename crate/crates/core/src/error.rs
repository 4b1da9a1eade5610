use thiserror::Error;

use crate::simulator::SweepSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    /// A load or injection violates the passive-network assumption.
    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("power flow did not converge within {iterations} iterations (last max step {last_step:.3e} V)")]
    Diverged {
        iterations: usize,
        last_step: f64,
        last: Box<SweepSolution>,
    },

    #[error("infeasible scenario: voltage {voltage:.3} V at node {node} is below the collapse floor {floor:.3} V")]
    Infeasible { node: usize, voltage: f64, floor: f64 },

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("insufficient evidence: {0}")]
    EmptyEvidence(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("study aborted: {failed} of {total} runs failed (tolerance {tolerance_pct}%)")]
    StudyFailed {
        failed: usize,
        total: usize,
        tolerance_pct: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
