//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("q-series did not reach target error {target:e} within {max_terms} terms (im = {im})")]
    NonConvergence {
        target: f64,
        max_terms: usize,
        im: f64,
    },

    #[error("branch tracking failed: log automorphy jump of {jump} exceeds pi")]
    BranchTrackingFailure { jump: f64 },

    #[error("fundamental-domain reduction exceeded {limit} steps")]
    IterationLimit { limit: usize },

    #[error("kernel pole too close: |J(tau) - J(z)| = {dist:e} below relative tolerance")]
    PoleProximity { dist: f64 },

    #[error("quadrature reached level {level} with error estimate {estimate:e} > target {target:e}")]
    AccuracyNotReached {
        level: usize,
        estimate: f64,
        target: f64,
    },

    #[error("aliasing suspected: top-quarter coefficient magnitudes do not decay (ratio {ratio:e})")]
    AliasingSuspected { ratio: f64 },

    #[error("tables disagree: {0}")]
    GridMismatch(String),

    #[error("grid too short for requested fit: {0}")]
    GridTooShort(String),

    #[error("tail beyond the grid is not negligible (estimate {estimate:e} > {target:e})")]
    TailNotNegligible { estimate: f64, target: f64 },

    #[error("oscillation budget exceeded: {panels} panels at target {target:e}")]
    OscillationBudgetExceeded { panels: usize, target: f64 },

    #[error("table does not cover the request: {0}")]
    TableRangeExceeded(String),

    #[error("sample radius {radius} outside the function grid [{lo}, {hi}]")]
    GridCoverage { radius: f64, lo: f64, hi: f64 },

    #[error("operator is not a contraction: budget {budget} >= 1")]
    NotContracting { budget: f64 },

    #[error("iteration stagnated: measured ratio {ratio} exceeds budget {budget} + 0.05")]
    Stagnation { ratio: f64, budget: f64 },

    #[error("sphere quadrature degree {degree} insufficient for requested harmonics {needed}")]
    QuadratureDegreeInsufficient { degree: usize, needed: usize },

    #[error("series truncation budget exceeded: {0}")]
    TruncationBudget(String),

    #[error("parity violation of {0:e} beyond tolerance")]
    ParityViolation(f64),

    #[error("total integral of g is {0:e}, not zero; antiderivative undefined")]
    TotalIntegralNonzero(f64),

    #[error("perturbation exceeds the declared budget: {0}")]
    BudgetExceeded(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
