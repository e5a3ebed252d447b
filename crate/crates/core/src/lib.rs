//! Finite element eigensolver built on multilevel correction: an elliptic
//! eigenvalue problem is reduced to multigrid solves of source problems on a
//! nested mesh hierarchy plus small dense eigensolves on an augmented coarse
//! space.

mod clock;
pub mod eigsolver;
pub mod error;
pub mod fem;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod multigrid;

pub use error::{Error, Result};
