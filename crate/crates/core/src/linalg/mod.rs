//! Self-contained sparse and dense symmetric linear algebra.

mod cg;
mod dense;
mod sparse;

pub use cg::{cg_solve, pcg_solve, CgOutcome};
pub use dense::{
    cholesky_dense, generalized_eig_dense, jacobi_eigen, normalize_sign, pivoted_cholesky,
    Cholesky, DenseMatrix, EigenPair, PivotedCholesky,
};
pub use sparse::{axpy, dot, norm2, CsrMatrix};

use crate::error::{Error, Result};

/// Modified Gram–Schmidt in the inner product induced by `m`.
///
/// Fails if a vector becomes (numerically) dependent on its predecessors.
pub fn m_orthonormalize(m: &CsrMatrix, vectors: &mut [Vec<f64>]) -> Result<()> {
    for i in 0..vectors.len() {
        let (done, rest) = vectors.split_at_mut(i);
        let v = &mut rest[0];
        let original = m.quadratic_form(v)?.max(0.0).sqrt();
        // two passes restore orthogonality lost to cancellation
        for _ in 0..2 {
            let mv = m.spmv(v)?;
            for u in done.iter() {
                let c = dot(u, &mv);
                axpy(-c, u, v);
            }
        }
        let nrm = m.quadratic_form(v)?.max(0.0).sqrt();
        if !(nrm > 1e-12 * original) || nrm == 0.0 {
            return Err(Error::Solver(format!(
                "vector {i} is linearly dependent in the mass inner product"
            )));
        }
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    Ok(())
}

/// Largest `|v_iᵀ M v_j - δ_ij|`.
pub fn orthonormality_defect(m: &CsrMatrix, vectors: &[Vec<f64>]) -> Result<f64> {
    let mv: Vec<Vec<f64>> = vectors.iter().map(|v| m.spmv(v)).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for (i, vi) in vectors.iter().enumerate() {
        for (j, mvj) in mv.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(vi, mvj) - target).abs());
        }
    }
    Ok(worst)
}
