use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input document (syntax or schema).
    #[error("parse error: {0}")]
    Parse(String),

    /// Well-formed input that violates a model invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown input label '{0}'")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    /// A configurable cap on materialized states was exceeded.
    #[error("resource cap exceeded: more than {cap} {what}")]
    Resource { what: &'static str, cap: usize },

    #[error("not implemented: {0}")]
    NotImplemented(String),

    /// Simulation precision incompatible with the requested opacity level.
    #[error("precision error: epsilon {epsilon} exceeds delta/2 (delta = {delta})")]
    Precision { epsilon: f64, delta: f64 },

    #[error("quantization error: {0}")]
    Quantization(String),

    /// Dynamics evaluated to a non-finite value or left the state grid.
    #[error("domain error at state {state:?}, input {input:?}: {reason}")]
    Domain {
        state: Vec<f64>,
        input: Vec<f64>,
        reason: String,
    },

    #[error("small-gain condition violated: gamma1 * gamma2 = {product} >= 1")]
    SmallGain { product: f64 },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
