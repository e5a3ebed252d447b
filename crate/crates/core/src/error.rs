use thiserror::Error;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not positive semidefinite (v'Mv = {0:e})")]
    NotPsd(f64),

    #[error("conjugate gradient breakdown at iteration {0}: p'Mp <= 0")]
    CgBreakdown(usize),

    #[error("no convergence after {iterations} iterations: {what}")]
    Convergence { what: String, iterations: usize },

    #[error("assembly error in triangle {triangle}: {msg}")]
    Assembly { triangle: usize, msg: String },

    #[error("degenerate augmented space: {kept} independent columns left, {needed} needed")]
    DegenerateAugmentation { kept: usize, needed: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("mesh too large: projected {projected} vertices exceeds cap {cap}")]
    Sizing { projected: usize, cap: usize },

    #[error("level {level} out of range (hierarchy has {n_levels} levels)")]
    LevelOutOfRange { level: usize, n_levels: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
