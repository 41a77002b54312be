use thiserror::Error;

/// Failures raised anywhere in the symbol pipeline, the recovery stage, or
/// the reference solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DtnError {
    #[error("jet shape mismatch: ({left_vars} vars, order {left_order}) vs ({right_vars} vars, order {right_order})")]
    ShapeMismatch {
        left_vars: usize,
        left_order: usize,
        right_vars: usize,
        right_order: usize,
    },

    #[error("singular {quantity}: constant term {value:e}")]
    Singularity { quantity: String, value: f64 },

    #[error("derivative budget exhausted for {quantity}: needs {needed} derivative(s), {available} available")]
    DerivativeBudget {
        quantity: String,
        needed: usize,
        available: i32,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("inadmissible Lame coefficients: {0}")]
    Inadmissible(String),

    #[error("principal branch check failed: {0}")]
    Branch(String),

    #[error("Sylvester operator is near-singular (condition number {condition:.3e})")]
    NearSingular { condition: f64 },

    #[error("inconsistent data: {0}")]
    DataInconsistency(String),

    #[error("degenerate solution basis: {0}")]
    DegenerateBasis(String),

    #[error("integration failed at |xi'| = {xi_norm}: {reason}")]
    Integration { xi_norm: f64, reason: String },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
}

pub type Result<T> = std::result::Result<T, DtnError>;
