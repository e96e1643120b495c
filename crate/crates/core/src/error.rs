//! Error type shared by every module of the solver.

use thiserror::Error;

/// Failures raised by parameter validation, operator assembly and time stepping.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-positive viscosity: {0}")]
    NonPositiveViscosity(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("delta = {delta} exceeds mu/(4 C_P) = {limit} (C_P = {c_p})")]
    DeltaTooLarge { delta: f64, limit: f64, c_p: f64 },
    #[error("quadrature order too low: {0}")]
    QuadratureOrderTooLow(String),
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("density 1 + eta is non-positive (min = {min})")]
    DensityNonPositive { min: f64 },
    #[error("velocity is not divergence free (max |xi . v| = {0:e})")]
    NotSolenoidal(f64),
    #[error("implicit solve failed: {0}")]
    SolveFailed(String),
    #[error("wave vector must be non-zero")]
    ZeroMode,
    #[error("eigenvalue solver failed: {0}")]
    EigSolverFailure(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("series has a non-positive value at index {0}")]
    NonPositiveSeries(usize),
    #[error("degenerate abscissa: {0}")]
    DegenerateAbscissa(String),
    #[error("time step failed at t = {t}: {source}")]
    Step {
        t: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
