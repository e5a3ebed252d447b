use super::sparse::{axpy, dot, norm2, CsrMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final residual 2-norm `‖b - M x‖`.
    pub residual: f64,
}

/// Conjugate gradients on an SPD system. Stops once
/// `‖b - M x‖ <= tol * ‖b - M x0‖` or after `max_iters` iterations.
pub fn cg_solve(m: &CsrMatrix, b: &[f64], x0: &[f64], max_iters: usize, tol: f64) -> Result<CgOutcome> {
    pcg_solve(m, b, x0, max_iters, tol, |r: &[f64]| r.to_vec())
}

/// Preconditioned conjugate gradients with the flexible (Polak–Ribière)
/// update, so a mildly nonlinear preconditioner such as a multigrid cycle
/// is tolerated. Same stopping rule as [`cg_solve`].
pub fn pcg_solve<P>(
    m: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    max_iters: usize,
    tol: f64,
    mut precondition: P,
) -> Result<CgOutcome>
where
    P: FnMut(&[f64]) -> Vec<f64>,
{
    let n = m.n_rows();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    let mut r = m.spmv(&x)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let target = tol * norm2(&r);
    let mut res = norm2(&r);
    if res <= target {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual: res,
        });
    }

    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut mp = vec![0.0; n];
    for it in 1..=max_iters {
        m.spmv_into(&p, &mut mp)?;
        let pmp = dot(&p, &mp);
        if !(pmp > 0.0) {
            return Err(Error::CgBreakdown(it));
        }
        let alpha = rz / pmp;
        axpy(alpha, &p, &mut x);
        let r_old = r.clone();
        axpy(-alpha, &mp, &mut r);
        res = norm2(&r);
        if res <= target {
            return Ok(CgOutcome {
                x,
                iterations: it,
                residual: res,
            });
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let dr: Vec<f64> = r.iter().zip(&r_old).map(|(a, b)| a - b).collect();
        let beta = (dot(&z, &dr) / rz).max(0.0);
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok(CgOutcome {
        x,
        iterations: max_iters,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn identity_converges_in_one_step() {
        let b = vec![1.0, -3.0, 2.5, 0.25];
        let out = cg_solve(&CsrMatrix::identity(4), &b, &[0.0; 4], 10, 1e-12).unwrap();
        assert_eq!(out.iterations, 1);
        for (x, y) in out.x.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_guess_takes_no_iterations() {
        let m = tridiag(6);
        let xs: Vec<f64> = (0..6).map(|i| i as f64 * 0.3 - 1.0).collect();
        let b = m.spmv(&xs).unwrap();
        let out = cg_solve(&m, &b, &xs, 10, 1e-10).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, xs);
    }

    #[test]
    fn energy_error_is_monotone() {
        let n = 30;
        let m = tridiag(n);
        let xs: Vec<f64> = (0..n).map(|i| ((i * 7 % 11) as f64).sin()).collect();
        let b = m.spmv(&xs).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..n {
            let out = cg_solve(&m, &b, &vec![0.0; n], k, 0.0).unwrap();
            let e: Vec<f64> = out.x.iter().zip(&xs).map(|(a, b)| a - b).collect();
            let en = m.quadratic_form(&e).unwrap().max(0.0).sqrt();
            assert!(en <= last * (1.0 + 1e-12) + 1e-14, "step {k}: {en} > {last}");
            last = en;
        }
    }

    #[test]
    fn indefinite_breaks_down() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        assert!(matches!(
            cg_solve(&m, &[0.0, 1.0], &[0.0, 0.0], 5, 1e-12),
            Err(Error::CgBreakdown(1))
        ));
    }
}
