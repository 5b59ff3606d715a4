use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Model parameters outside the admissible window of the selected preset.
    #[error("parameter window violated: {what}; admissible: {admissible}")]
    ParameterWindow { what: String, admissible: String },

    /// A non-finite value appeared during a computation.
    #[error("numerical abort at node {node} (t = {time:e}): {detail}")]
    NumericalAbort { node: usize, time: f64, detail: String },

    /// Picard iteration did not reach the tolerance.
    #[error("fixed-point iteration did not converge after {iterations} iterations (last factor {last_factor:e})")]
    NoContraction {
        iterations: usize,
        last_factor: f64,
        factor_history: Vec<f64>,
        diff_history: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::InvalidInput(msg.into()))
}
