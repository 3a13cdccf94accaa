use thiserror::Error;

use crate::scf::SolveResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("negative argument {0} passed to the entropy function")]
    NegativeArgument(f64),

    #[error("invalid entropy specification: {0}")]
    InvalidEntropy(String),

    #[error("p(M) undefined: beta vanishes at m = {0}")]
    UndefinedAtZero(f64),

    #[error("density is negative at node {index} (value {value})")]
    NegativeDensity { index: usize, value: f64 },

    #[error("eigensolver failed for l = {l}: {reason}")]
    ConvergenceFailure { l: usize, reason: String },

    #[error("mass {requested} not attainable with mu < 0 (at most {available} fits in the bound spectrum)")]
    MassNotAttainable { requested: f64, available: f64 },

    #[error("no bound levels available for occupation")]
    EmptySpectrum,

    #[error("SCF did not converge after {} iterations", .0.iterations)]
    NotConverged(Box<SolveResult>),

    #[error("invalid temperature {0}")]
    InvalidTemperature(f64),

    #[error("invalid mass {0}")]
    InvalidMass(f64),

    #[error("need at least two distinct bound levels, found {0}")]
    InsufficientSpectrum(usize),

    #[error("no root of T -> i(M,T) below the probe ceiling {ceiling}")]
    NoRootFound { ceiling: f64 },

    #[error("descent stagnated: {0}")]
    Stagnation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
