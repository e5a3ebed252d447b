//! Multilevel-correction eigensolver.
//!
//! A correction step on level `k` smooths each current eigenvector
//! approximation with a few multigrid cycles applied to the source problem
//! `A_k û = λ B_k u`, then extracts Ritz pairs from the small space spanned by
//! the coarse finite element space and the smoothed vectors. The full
//! multigrid scheme solves exactly on the coarsest level and climbs the
//! hierarchy, prolongating the eigenvectors and applying `p` correction steps
//! per level.

use std::time::Duration;

use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::fem::CoefficientField;
use crate::linalg::{
    dot, generalized_eig_dense, m_orthonormalize, norm2, normalize_sign, pcg_solve, pivoted_cholesky, CsrMatrix,
    DenseMatrix,
};
use crate::mesh::MeshHierarchy;
use crate::multigrid::{build_mg_context, mg_solve, MgContext, Smoother};

/// `q` eigenpair approximations on one level, eigenvalues ascending and
/// vectors orthonormal in the level's mass inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenApprox {
    pub level: usize,
    pub eigenvalues: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl EigenApprox {
    pub fn q(&self) -> usize {
        self.eigenvalues.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Number of eigenpairs.
    pub q: usize,
    /// Multigrid cycles per correction step.
    pub m: usize,
    /// Correction steps per level.
    pub p: usize,
    /// Pre- and post-smoothing steps per cycle.
    pub nu: usize,
    /// Level whose space serves as the coarse correction space.
    pub coarse_index: usize,
    /// Relative pivot threshold below which augmented columns are dropped.
    pub gram_drop_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            q: 1,
            m: 2,
            p: 2,
            nu: 2,
            coarse_index: 0,
            gram_drop_tol: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("q", self.q), ("m", self.m), ("p", self.p), ("nu", self.nu)] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        if !(self.gram_drop_tol >= 0.0 && self.gram_drop_tol < 1.0) {
            return Err(Error::InvalidArgument("gram_drop_tol must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

fn finish_vectors(mass: &CsrMatrix, vectors: &mut [Vec<f64>]) -> Result<()> {
    m_orthonormalize(mass, vectors)?;
    vectors.iter_mut().for_each(|v| normalize_sign(v));
    Ok(())
}

/// Dense solve of the `q` smallest eigenpairs on hierarchy level 0.
pub fn coarse_eigensolve(ctx: &MgContext, q: usize) -> Result<EigenApprox> {
    dense_level_eigensolve(ctx, 0, q)
}

fn dense_level_eigensolve(ctx: &MgContext, level: usize, q: usize) -> Result<EigenApprox> {
    let n = ctx.n_dofs(level);
    if q == 0 || q > n {
        return Err(Error::InvalidArgument(format!(
            "{q} eigenpairs requested but level {level} has {n} dofs"
        )));
    }
    let pairs = generalized_eig_dense(&ctx.stiffness(level).to_dense(), &ctx.mass(level).to_dense(), q)?;
    let eigenvalues = pairs.iter().map(|p| p.value).collect();
    let mut vectors: Vec<Vec<f64>> = pairs.into_iter().map(|p| p.vector).collect();
    finish_vectors(ctx.mass(level), &mut vectors)?;
    Ok(EigenApprox {
        level,
        eigenvalues,
        vectors,
    })
}

/// Diagnostics of one Ritz extraction on an augmented coarse space.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentInfo {
    /// Dimension of the augmented space before rank filtering.
    pub dimension: usize,
    /// Indices (into the augmenting vectors) of columns dropped as dependent.
    pub dropped: Vec<usize>,
}

/// Ritz pairs of level `level` on `V_coarse + span(extra)`.
///
/// The basis is `C = [P | extra]` with `P` the composed interior prolongation;
/// `Cᵀ A C` and `Cᵀ B C` are formed densely (the `PᵀAP` block is cached on the
/// context), columns that are numerically dependent in the `B` inner product are
/// dropped by a pivoted Cholesky factorization of the unit-diagonal scaled Gram
/// matrix, and the `q` smallest Ritz pairs are mapped back through `C`.
pub fn augmented_ritz(
    ctx: &MgContext,
    level: usize,
    coarse_index: usize,
    extra: &[Vec<f64>],
    q: usize,
    drop_tol: f64,
) -> Result<(EigenApprox, AugmentInfo)> {
    if coarse_index > level {
        return Err(Error::InvalidArgument(format!(
            "coarse level {coarse_index} is finer than level {level}"
        )));
    }
    let block = ctx.coarse_block(coarse_index, level)?;
    let a = ctx.stiffness(level);
    let b = ctx.mass(level);
    let nh = block.prolongation.n_cols();
    let ne = extra.len();
    let dim = nh + ne;

    let a_extra: Vec<Vec<f64>> = extra.iter().map(|u| a.spmv(u)).collect::<Result<_>>()?;
    let b_extra: Vec<Vec<f64>> = extra.iter().map(|u| b.spmv(u)).collect::<Result<_>>()?;
    let mut a_aug = DenseMatrix::zeros(dim, dim);
    let mut b_aug = DenseMatrix::zeros(dim, dim);
    for i in 0..nh {
        for j in 0..nh {
            a_aug[(i, j)] = block.stiffness[(i, j)];
            b_aug[(i, j)] = block.mass[(i, j)];
        }
    }
    for (j, (au, bu)) in a_extra.iter().zip(&b_extra).enumerate() {
        let pa = block.prolongation.spmv_transpose(au)?;
        let pb = block.prolongation.spmv_transpose(bu)?;
        for i in 0..nh {
            a_aug[(i, nh + j)] = pa[i];
            a_aug[(nh + j, i)] = pa[i];
            b_aug[(i, nh + j)] = pb[i];
            b_aug[(nh + j, i)] = pb[i];
        }
        for (i, ui) in extra.iter().enumerate().skip(j) {
            let av = dot(ui, au);
            let bv = dot(ui, bu);
            a_aug[(nh + i, nh + j)] = av;
            a_aug[(nh + j, nh + i)] = av;
            b_aug[(nh + i, nh + j)] = bv;
            b_aug[(nh + j, nh + i)] = bv;
        }
    }

    let scale: Vec<f64> = (0..dim).map(|i| b_aug[(i, i)].max(0.0).sqrt()).collect();
    if let Some(i) = scale.iter().position(|&s| !(s > 0.0) || !s.is_finite()) {
        if i < nh {
            return Err(Error::Solver(format!("coarse basis column {i} has zero mass")));
        }
    }
    let scaled = DenseMatrix::from_fn(dim, dim, |i, j| {
        let s = scale[i] * scale[j];
        if s > 0.0 {
            b_aug[(i, j)] / s
        } else {
            0.0
        }
    });
    let piv = pivoted_cholesky(&scaled, drop_tol)?;
    let kept = piv.kept();
    let dropped: Vec<usize> = piv.dropped().into_iter().filter(|&i| i >= nh).map(|i| i - nh).collect();
    if kept.len() < q {
        return Err(Error::DegenerateAugmentation {
            kept: kept.len(),
            needed: q,
        });
    }

    let pairs = generalized_eig_dense(&a_aug.principal_submatrix(&kept), &b_aug.principal_submatrix(&kept), q)?;
    let n = ctx.n_dofs(level);
    let mut eigenvalues = Vec::with_capacity(q);
    let mut vectors = Vec::with_capacity(q);
    for pair in pairs {
        let mut coarse = vec![0.0; nh];
        let mut u = vec![0.0; n];
        for (&col, &y) in kept.iter().zip(&pair.vector) {
            if col < nh {
                coarse[col] = y;
            } else {
                crate::linalg::axpy(y, &extra[col - nh], &mut u);
            }
        }
        let pc = block.prolongation.spmv(&coarse)?;
        for (ui, pi) in u.iter_mut().zip(&pc) {
            *ui += pi;
        }
        eigenvalues.push(pair.value);
        vectors.push(u);
    }
    finish_vectors(b, &mut vectors)?;
    Ok((
        EigenApprox {
            level,
            eigenvalues,
            vectors,
        },
        AugmentInfo { dimension: dim, dropped },
    ))
}

/// Residual growth factor beyond which a multigrid solve counts as diverged.
const DIVERGENCE_FACTOR: f64 = 10.0;

/// One multilevel correction of every eigenpair in `approx`.
pub fn one_correction_step(ctx: &MgContext, approx: &EigenApprox, config: &SolverConfig) -> Result<EigenApprox> {
    config.validate()?;
    let k = approx.level;
    if k <= config.coarse_index || k >= ctx.n_levels() {
        return Err(Error::InvalidArgument(format!(
            "correction needs coarse level {} < level {k} < {}",
            config.coarse_index,
            ctx.n_levels()
        )));
    }
    let a = ctx.stiffness(k);
    let b = ctx.mass(k);
    let mut smoothed = Vec::with_capacity(approx.q());
    for (lambda, u) in approx.eigenvalues.iter().zip(&approx.vectors) {
        let mut f = b.spmv(u)?;
        f.iter_mut().for_each(|v| *v *= lambda);
        let before = residual_norm(a, &f, u)?;
        let u_tilde = mg_solve(ctx, k, &f, u, config.m)?;
        let after = residual_norm(a, &f, &u_tilde)?;
        if !after.is_finite() || (after > DIVERGENCE_FACTOR * before && after > 1e-10 * norm2(&f)) {
            return Err(Error::Solver(format!(
                "multigrid diverged on level {k}: residual {before:e} -> {after:e}"
            )));
        }
        smoothed.push(u_tilde);
    }
    let (next, _) = augmented_ritz(ctx, k, config.coarse_index, &smoothed, approx.q(), config.gram_drop_tol)?;
    Ok(next)
}

fn residual_norm(a: &CsrMatrix, f: &[f64], x: &[f64]) -> Result<f64> {
    let ax = a.spmv(x)?;
    Ok(ax.iter().zip(f).map(|(p, q)| (q - p).powi(2)).sum::<f64>().sqrt())
}

/// Prolongates eigenvector approximations one level up and re-orthonormalizes.
pub fn prolongate_approx(ctx: &MgContext, approx: &EigenApprox) -> Result<EigenApprox> {
    let to = approx.level + 1;
    if to >= ctx.n_levels() {
        return Err(Error::LevelOutOfRange {
            level: to,
            n_levels: ctx.n_levels(),
        });
    }
    let mut vectors: Vec<Vec<f64>> = approx
        .vectors
        .iter()
        .map(|v| ctx.transfer(approx.level).spmv(v))
        .collect::<Result<_>>()?;
    finish_vectors(ctx.mass(to), &mut vectors)?;
    Ok(EigenApprox {
        level: to,
        eigenvalues: approx.eigenvalues.clone(),
        vectors,
    })
}

/// Result of one level of the full multigrid climb.
#[derive(Debug, Clone)]
pub struct LevelReport {
    pub approx: EigenApprox,
    /// Smoothing work spent producing this level (including its cycles' coarser levels).
    pub work_units: u64,
    pub elapsed: Duration,
}

/// Full multigrid on an existing context, reporting every level.
pub fn full_multigrid_trace(ctx: &MgContext, config: &SolverConfig) -> Result<Vec<LevelReport>> {
    config.validate()?;
    if config.coarse_index >= ctx.n_levels() {
        return Err(Error::LevelOutOfRange {
            level: config.coarse_index,
            n_levels: ctx.n_levels(),
        });
    }
    let start = Stopwatch::start();
    let w0 = ctx.work_units();
    let mut current = coarse_eigensolve(ctx, config.q)?;
    let mut reports = vec![LevelReport {
        approx: current.clone(),
        work_units: ctx.work_units() - w0,
        elapsed: start.elapsed(),
    }];
    // levels up to the coarse correction space are solved by prolongation + dense Ritz
    for k in 1..ctx.n_levels() {
        let start = Stopwatch::start();
        let w0 = ctx.work_units();
        current = prolongate_approx(ctx, &current)?;
        if k <= config.coarse_index {
            current = dense_level_eigensolve(ctx, k, config.q)?;
        } else {
            for _ in 0..config.p {
                current = one_correction_step(ctx, &current, config)?;
            }
        }
        reports.push(LevelReport {
            approx: current.clone(),
            work_units: ctx.work_units() - w0,
            elapsed: start.elapsed(),
        });
    }
    Ok(reports)
}

/// Full multigrid scheme: exact solve on the first level, then `p` correction
/// steps on each finer level. Returns the finest-level approximation.
pub fn full_multigrid(hierarchy: &MeshHierarchy, coeff: &dyn CoefficientField, config: &SolverConfig) -> Result<EigenApprox> {
    config.validate()?;
    let ctx = build_mg_context(hierarchy, coeff, config.nu)?;
    let mut trace = full_multigrid_trace(&ctx, config)?;
    Ok(trace.pop().expect("at least one level").approx)
}

/// Iteration cap of the reference solver.
const DIRECT_MAX_ITERS: usize = 500;

/// Reference eigensolver on the finest level: block inverse iteration with
/// multigrid-preconditioned CG inner solves and a Rayleigh–Ritz projection per
/// sweep, run until eigenvalues change by at most `tol` (relative) and every
/// residual `‖A u - λ B u‖` is at most `tol · max|A_ij|`.
pub fn direct_fine_solve(ctx: &MgContext, q: usize, tol: f64) -> Result<EigenApprox> {
    direct_level_solve(ctx, ctx.finest_level(), q, tol)
}

/// [`direct_fine_solve`] on an arbitrary level of the context.
pub fn direct_level_solve(ctx: &MgContext, level: usize, q: usize, tol: f64) -> Result<EigenApprox> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if level >= ctx.n_levels() {
        return Err(Error::LevelOutOfRange {
            level,
            n_levels: ctx.n_levels(),
        });
    }
    let n = ctx.n_dofs(level);
    if q == 0 || q > n {
        return Err(Error::InvalidArgument(format!(
            "{q} eigenpairs requested but level {level} has {n} dofs"
        )));
    }
    if level == 0 {
        return dense_level_eigensolve(ctx, 0, q);
    }
    let a = ctx.stiffness(level);
    let b = ctx.mass(level);
    let a_max = a.max_abs();

    // start block: coarse eigenvectors carried up the hierarchy, padded with
    // deterministic pseudo-random vectors when the coarse space is too small
    let block = (2 * q + 2).min(n);
    let n0 = ctx.n_dofs(0);
    let from_coarse = block.min(n0);
    let mut x: Vec<Vec<f64>> = if from_coarse > 0 {
        dense_level_eigensolve(ctx, 0, from_coarse)?
            .vectors
            .iter()
            .map(|v| ctx.prolongate(0, level, v))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut seed = 0x9E37_79B9_7F4A_7C15u64;
    while x.len() < block {
        x.push(
            (0..n)
                .map(|_| {
                    seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect(),
        );
    }
    let (mut lambdas, mut x) = rayleigh_ritz(a, b, &x)?;

    let precondition = |r: &[f64]| {
        ctx.v_cycle_with(level, r, &vec![0.0; r.len()], Smoother::SymmetricGaussSeidel)
            .expect("level dimensions")
    };
    for _ in 0..DIRECT_MAX_ITERS {
        let mut y = Vec::with_capacity(block);
        for (lam, xi) in lambdas.iter().zip(&x) {
            let rhs = b.spmv(xi)?;
            let guess: Vec<f64> = xi.iter().map(|v| v / lam).collect();
            let out = pcg_solve(a, &rhs, &guess, 200, 1e-10, precondition)?;
            y.push(out.x);
        }
        let (new_lambdas, new_x) = rayleigh_ritz(a, b, &y)?;
        let change = (0..q)
            .map(|j| ((new_lambdas[j] - lambdas[j]) / new_lambdas[j]).abs())
            .fold(0.0, f64::max);
        lambdas = new_lambdas;
        x = new_x;
        if change <= tol {
            let worst = (0..q)
                .map(|j| eigen_residual(a, b, lambdas[j], &x[j]))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            if worst <= tol * a_max {
                x.truncate(q);
                lambdas.truncate(q);
                finish_vectors(b, &mut x)?;
                return Ok(EigenApprox {
                    level,
                    eigenvalues: lambdas,
                    vectors: x,
                });
            }
        }
    }
    Err(Error::Convergence {
        what: format!("block inverse iteration on level {level}"),
        iterations: DIRECT_MAX_ITERS,
    })
}

/// Rayleigh–Ritz on `span(basis)`: all Ritz values ascending with their vectors.
pub fn rayleigh_ritz(a: &CsrMatrix, b: &CsrMatrix, basis: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let s = basis.len();
    let ab: Vec<Vec<f64>> = basis.iter().map(|v| a.spmv(v)).collect::<Result<_>>()?;
    let bb: Vec<Vec<f64>> = basis.iter().map(|v| b.spmv(v)).collect::<Result<_>>()?;
    let sa = DenseMatrix::from_fn(s, s, |i, j| 0.5 * (dot(&basis[i], &ab[j]) + dot(&basis[j], &ab[i])));
    let sb = DenseMatrix::from_fn(s, s, |i, j| 0.5 * (dot(&basis[i], &bb[j]) + dot(&basis[j], &bb[i])));
    let pairs = generalized_eig_dense(&sa, &sb, s)?;
    let n = basis.first().map_or(0, Vec::len);
    let mut values = Vec::with_capacity(s);
    let mut vectors = Vec::with_capacity(s);
    for pair in pairs {
        let mut u = vec![0.0; n];
        for (c, v) in pair.vector.iter().zip(basis) {
            crate::linalg::axpy(*c, v, &mut u);
        }
        normalize_sign(&mut u);
        values.push(pair.value);
        vectors.push(u);
    }
    Ok((values, vectors))
}

/// `‖A u - λ B u‖₂`.
pub fn eigen_residual(a: &CsrMatrix, b: &CsrMatrix, lambda: f64, u: &[f64]) -> Result<f64> {
    let au = a.spmv(u)?;
    let bu = b.spmv(u)?;
    Ok(au.iter().zip(&bu).map(|(x, y)| (x - lambda * y).powi(2)).sum::<f64>().sqrt())
}

/// Energy-norm distance between `u` and `reference` after aligning the sign
/// of `u` by the sign of their mass inner product.
pub fn aligned_energy_error(a: &CsrMatrix, b: &CsrMatrix, u: &[f64], reference: &[f64]) -> Result<f64> {
    let s = if dot(u, &b.spmv(reference)?) < 0.0 { -1.0 } else { 1.0 };
    let e: Vec<f64> = u.iter().zip(reference).map(|(x, r)| r - s * x).collect();
    crate::fem::norm_a(a, &e)
}
