//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by parsing, evaluation, and the synthesis stages.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown variable `{name}` at offset {offset}")]
    UnknownVariable { name: String, offset: usize },

    #[error("division by zero at offset {offset}")]
    DivideByZero { offset: usize },

    #[error("domain error at offset {offset}: {message}")]
    Domain { offset: usize, message: String },

    #[error("exponential polynomials have mismatched decay rates ({left} vs {right})")]
    AlphaMismatch { left: f64, right: f64 },

    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    #[error("linearized system is not controllable (Kalman rank {rank} < {n})")]
    NotControllable { rank: usize, n: usize },

    #[error("system is not controllable at the target state (rank {rank} < {n}, blocks {blocks:?})")]
    NotControllableAtTarget {
        rank: usize,
        n: usize,
        blocks: Vec<usize>,
    },

    #[error("shift cascade diverged at stage {stage} (|phi| = {norm:.3e} exceeds {limit:.3e})")]
    CascadeDiverged { stage: usize, norm: f64, limit: f64 },

    #[error("time-varying controllability columns are rank deficient (accepted {accepted} of {n})")]
    RankDeficient { accepted: usize, n: usize },

    #[error("controllability matrix solve is singular at tau = {tau} (condition {condition:.3e})")]
    SingularAtTau { tau: f64, condition: f64 },

    #[error("duplicate closed-loop poles: {pole}")]
    DuplicatePoles { pole: f64 },

    #[error("time-scale rate alpha must be positive (got {alpha})")]
    NonPositiveAlpha { alpha: f64 },

    #[error("adaptive integrator exceeded the step rejection limit near tau = {tau}")]
    StepRejectionLimit { tau: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
