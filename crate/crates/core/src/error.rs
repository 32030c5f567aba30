use thiserror::Error;

use crate::discretization::Field;

/// Errors raised while evaluating a nonlinearity model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("nonlinearity evaluated at negative argument s = {0}; apply the positive part first")]
    NegativeArgument(f64),
    #[error("invalid model parameters: {0}")]
    InvalidParameters(String),
}

/// Mismatch between a grid, a model and the requested computation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("grid/model mismatch: {0}")]
    Mismatch(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Failures of the iterative solvers. Variants that can hand back a usable
/// iterate carry it.
#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    LinearNonConvergence { iterations: usize, residual: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no negative-energy endpoint after {doublings} doublings; superlinearity violated numerically")]
    EndpointNotFound { doublings: usize },
    #[error("mountain pass stagnated after {sweeps} sweeps (gradient norm {grad_norm:.3e}, level {level:.6e})")]
    Stagnation {
        sweeps: usize,
        grad_norm: f64,
        level: f64,
        best: Box<Field>,
    },
    #[error("invalid mountain-pass path: {0}")]
    InvalidPath(String),
    #[error("critical point rejected: {0}")]
    Trivial(String),
    #[error("continuation failed after {iterations} Newton steps (residual {residual:.3e}): {reason}")]
    Continuation {
        iterations: usize,
        residual: f64,
        reason: String,
    },
    #[error("structural failure: {0}")]
    Structural(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
