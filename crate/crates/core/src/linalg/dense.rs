//! Dense symmetric kernels: Cholesky (plain and pivoted) and the
//! cyclic-Jacobi generalized eigensolver used for every small eigenproblem.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n_cols), "ragged rows");
        Self {
            n_rows,
            n_cols,
            data: rows.concat(),
        }
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diagonal_from(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self[(i, j)]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n_rows.min(self.n_cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n_cols, self.n_rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Self {
        assert_eq!(self.n_cols, rhs.n_rows, "inner dimensions differ");
        let mut out = Self::zeros(self.n_rows, rhs.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.n_cols..(i + 1) * rhs.n_cols];
                for (o, &b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Rows and columns `idx` (in that order).
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), idx.len(), |i, j| self[(idx[i], idx[j])])
    }

    fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// Lower-triangular factor `L` with `L Lᵀ = M`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: DenseMatrix,
}

/// Relative pivot floor for the plain factorization.
const PIVOT_FLOOR: f64 = 1e-14;

pub fn cholesky_dense(m: &DenseMatrix) -> Result<Cholesky> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.n_rows(),
            got: m.n_cols(),
        });
    }
    let n = m.n_rows();
    let scale = (0..n).fold(0.0f64, |s, i| s.max(m[(i, i)].abs()));
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > PIVOT_FLOOR * scale) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(Cholesky { lower: l })
}

impl Cholesky {
    pub fn lower(&self) -> &DenseMatrix {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.n_rows()
    }

    /// Solves `L y = b` in place.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        let l = &self.lower;
        for i in 0..b.len() {
            let row = l.row(i);
            let s: f64 = row[..i].iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - s) / row[i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward_in_place(&self, y: &mut [f64]) {
        let l = &self.lower;
        let n = y.len();
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        x
    }
}

/// Outcome of a symmetric-pivoted Cholesky factorization with rank cut-off.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    /// Pivot order; the first `rank` entries are the retained columns.
    pub order: Vec<usize>,
    pub rank: usize,
    /// Remaining Schur-complement diagonal at each step, in pivot order.
    pub pivots: Vec<f64>,
}

impl PivotedCholesky {
    /// Retained column indices, sorted ascending.
    pub fn kept(&self) -> Vec<usize> {
        let mut k = self.order[..self.rank].to_vec();
        k.sort_unstable();
        k
    }

    pub fn dropped(&self) -> Vec<usize> {
        let mut d = self.order[self.rank..].to_vec();
        d.sort_unstable();
        d
    }
}

/// Pivoted Cholesky of a symmetric positive semidefinite matrix. Factorization
/// stops once the largest remaining pivot falls to `rel_tol` times the largest
/// initial diagonal entry.
pub fn pivoted_cholesky(m: &DenseMatrix, rel_tol: f64) -> Result<PivotedCholesky> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.n_rows(),
            got: m.n_cols(),
        });
    }
    let n = m.n_rows();
    let mut a = m.clone();
    let mut order: Vec<usize> = (0..n).collect();
    let max_diag = (0..n).fold(0.0f64, |s, i| s.max(a[(i, i)]));
    let mut pivots = Vec::with_capacity(n);
    let mut rank = 0;
    for k in 0..n {
        let (p, dmax) = (k..n)
            .map(|i| (i, a[(i, i)]))
            .fold((k, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
        if !(dmax > rel_tol * max_diag) {
            pivots.extend((k..n).map(|i| a[(i, i)]));
            break;
        }
        if p != k {
            order.swap(p, k);
            for j in 0..n {
                let t = a[(p, j)];
                a[(p, j)] = a[(k, j)];
                a[(k, j)] = t;
            }
            for i in 0..n {
                let t = a[(i, p)];
                a[(i, p)] = a[(i, k)];
                a[(i, k)] = t;
            }
        }
        pivots.push(dmax);
        let lkk = dmax.sqrt();
        a[(k, k)] = lkk;
        for i in k + 1..n {
            a[(i, k)] /= lkk;
        }
        for j in k + 1..n {
            let ljk = a[(j, k)];
            for i in j..n {
                let v = a[(i, j)] - a[(i, k)] * ljk;
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        rank += 1;
    }
    Ok(PivotedCholesky {
        order,
        rank,
        pivots,
    })
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations. Returns the
/// eigenvalues in Jacobi output order and the eigenvectors as the columns of
/// the second matrix.
pub fn jacobi_eigen(m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    const MAX_SWEEPS: usize = 100;
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.n_rows(),
            got: m.n_cols(),
        });
    }
    let n = m.n_rows();
    let mut a = m.clone();
    let mut v = DenseMatrix::identity(n);

    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].abs();
            }
        }
        if off == 0.0 {
            let evals = (0..n).map(|i| a[(i, i)]).collect();
            return Ok((evals, v));
        }
        let thresh = if sweep < 3 {
            0.2 * off / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let g = 100.0 * apq.abs();
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }
                let h = aqq - app;
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    let np = c * arp - s * arq;
                    let nq = s * arp + c * arq;
                    a[(r, p)] = np;
                    a[(p, r)] = np;
                    a[(r, q)] = nq;
                    a[(q, r)] = nq;
                }
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }
    Err(Error::Convergence {
        what: "Jacobi eigenvalue iteration".into(),
        iterations: MAX_SWEEPS,
    })
}

/// One generalized eigenpair `A y = λ B y`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// Flips `v` so that its largest-magnitude entry is positive.
pub fn normalize_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The `q` smallest eigenpairs of the symmetric-definite pencil `(A, B)`,
/// ascending, with `B`-orthonormal eigenvectors.
pub fn generalized_eig_dense(a: &DenseMatrix, b: &DenseMatrix, q: usize) -> Result<Vec<EigenPair>> {
    let n = a.n_rows();
    if !a.is_square() || !b.is_square() || b.n_rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.n_rows(),
        });
    }
    if q == 0 || q > n {
        return Err(Error::InvalidArgument(format!(
            "requested {q} eigenpairs of a {n}x{n} pencil"
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument("non-finite matrix entry".into()));
    }
    let chol = cholesky_dense(b)?;

    // C = L⁻¹ A L⁻ᵀ, built as L⁻¹ (L⁻¹ A)ᵀ
    let mut w = a.transpose();
    for i in 0..n {
        let mut col = w.row(i).to_vec();
        chol.forward_in_place(&mut col);
        for (j, v) in col.into_iter().enumerate() {
            w[(i, j)] = v;
        }
    }
    // rows of (L⁻¹A) are the columns of A L⁻ᵀ
    let mut c = w.transpose();
    for i in 0..n {
        let mut col = c.row(i).to_vec();
        chol.forward_in_place(&mut col);
        for (j, v) in col.into_iter().enumerate() {
            c[(i, j)] = v;
        }
    }
    let c = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));

    let (evals, z) = jacobi_eigen(&c)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| evals[i].total_cmp(&evals[j]));

    Ok(idx
        .into_iter()
        .take(q)
        .map(|k| {
            let mut y = z.column(k);
            chol.backward_in_place(&mut y);
            normalize_sign(&mut y);
            EigenPair {
                value: evals[k],
                vector: y,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_identity() {
        let c = cholesky_dense(&DenseMatrix::identity(4)).unwrap();
        assert_eq!(c.lower(), &DenseMatrix::identity(4));
    }

    #[test]
    fn cholesky_two_by_two() {
        let m = DenseMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]);
        let l = cholesky_dense(&m).unwrap();
        assert_eq!(
            l.lower(),
            &DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 2.0]])
        );
        let x = l.solve(&[6.0, 7.0]);
        let r = m.matvec(&x);
        assert!((r[0] - 6.0).abs() < 1e-14 && (r[1] - 7.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            cholesky_dense(&m),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn pivoted_cholesky_detects_rank() {
        // columns 0 and 2 identical
        let g = DenseMatrix::from_rows(&[
            vec![2.0, 1.0, 2.0],
            vec![1.0, 3.0, 1.0],
            vec![2.0, 1.0, 2.0],
        ]);
        let p = pivoted_cholesky(&g, 1e-12).unwrap();
        assert_eq!(p.rank, 2);
        assert_eq!(p.dropped().len(), 1);
    }

    #[test]
    fn diagonal_pencil() {
        let a = DenseMatrix::diagonal_from(&[3.0, 1.0, 2.0]);
        let b = DenseMatrix::identity(3);
        let pairs = generalized_eig_dense(&a, &b, 2).unwrap();
        assert_eq!(pairs[0].value, 1.0);
        assert_eq!(pairs[1].value, 2.0);
        assert_eq!(pairs[0].vector, vec![0.0, 1.0, 0.0]);
        assert_eq!(pairs[1].vector, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn q_out_of_range() {
        let a = DenseMatrix::identity(2);
        assert!(generalized_eig_dense(&a, &a, 3).is_err());
        assert!(generalized_eig_dense(&a, &a, 0).is_err());
    }

    #[test]
    fn indefinite_b_is_rejected() {
        let a = DenseMatrix::identity(2);
        let b = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert!(matches!(
            generalized_eig_dense(&a, &b, 1),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn sign_convention() {
        let mut v = vec![0.1, -0.9, 0.5];
        normalize_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.5]);
    }
}
