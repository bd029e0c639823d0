use thiserror::Error;

use crate::forms::AlgebraForm;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("logarithm at the branch point −I (‖U + I‖_F = {distance:e})")]
    BranchPoint { distance: f64 },

    #[error("form degree {degree} is too high for a {dim}-dimensional grid")]
    DegreeTooHigh { degree: usize, dim: usize },

    #[error("form degree mismatch: expected {expected}, found {found}")]
    DegreeMismatch { expected: usize, found: usize },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("operation needs a {expected}-dimensional grid, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("gauge map is not smooth at grid scale: jump {jump:.3} on a link at site {site} (limit 0.5)")]
    RoughGauge { site: usize, jump: f64 },

    #[error("connection is not flat: residual {residual:e} exceeds {tolerance:e}")]
    NotFlat { residual: f64, tolerance: f64 },

    #[error("integral {value} is not near an integer (distance {distance:.3}); refine the grid")]
    NotInteger { value: f64, distance: f64 },

    #[error("flat-connection search did not converge after {iterations} iterations (residual {residual:e})")]
    FlatSearch { residual: f64, iterations: usize, iterate: Box<AlgebraForm> },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("parse error at position {position}: expected {}", expected.join(" or "))]
    Parse { position: usize, expected: Vec<String> },

    #[error("rank decision is ill-conditioned: singular-value gap {gap:.3} < 10")]
    IllConditioned { gap: f64 },

    #[error("iterative eigensolver failed: {0}")]
    ConvergenceFailure(String),

    #[error("spectral flow step too coarse: {0}")]
    StepTooCoarse(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Runtime non-convergence, as opposed to a bad input.
    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            Error::FlatSearch { .. } | Error::NonConvergence { .. } | Error::ConvergenceFailure(_)
        )
    }
}
