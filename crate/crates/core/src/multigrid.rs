//! Geometric multigrid V-cycle on the interior-dof stiffness hierarchy.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, CoefficientField, DofMap};
use crate::linalg::{cholesky_dense, dot, Cholesky, CsrMatrix, DenseMatrix};
use crate::mesh::MeshHierarchy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoother {
    /// Conjugate gradient steps on the level system (nonlinear in the residual).
    ConjugateGradient,
    /// Forward then backward Gauss–Seidel sweep (linear and symmetric).
    SymmetricGaussSeidel,
}

#[derive(Debug, Clone)]
pub struct MgLevel {
    pub dofmap: DofMap,
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
}

/// Galerkin projections `Pᵀ A P`, `Pᵀ B P` of a fine level onto a coarser
/// level's space, plus the composed interior prolongation `P`.
#[derive(Debug, Clone)]
pub struct CoarseBlock {
    pub prolongation: CsrMatrix,
    pub stiffness: DenseMatrix,
    pub mass: DenseMatrix,
}

/// Everything a V-cycle needs, assembled once per hierarchy.
#[derive(Debug)]
pub struct MgContext {
    levels: Vec<MgLevel>,
    /// `transfers[k]` maps level-`k` interior dofs to level-`k+1` interior dofs.
    transfers: Vec<CsrMatrix>,
    coarse_factor: Cholesky,
    smoothing_steps: usize,
    smoother: Smoother,
    work: Vec<AtomicU64>,
    blocks: Mutex<HashMap<(usize, usize), Arc<CoarseBlock>>>,
}

/// Assembles stiffness and mass on every level, restricts the mesh
/// prolongations to interior dofs and factors the coarsest stiffness.
pub fn build_mg_context(hierarchy: &MeshHierarchy, coeff: &dyn CoefficientField, smoothing_steps: usize) -> Result<MgContext> {
    if smoothing_steps == 0 {
        return Err(Error::InvalidArgument("at least one smoothing step is required".into()));
    }
    let rho = |x| coeff.density(x);
    let levels = hierarchy
        .meshes()
        .iter()
        .map(|mesh| {
            let dofmap = DofMap::new(mesh);
            let stiffness = assemble_stiffness(mesh, &dofmap, coeff)?;
            let mass = assemble_mass(mesh, &dofmap, &rho)?;
            Ok(MgLevel {
                dofmap,
                stiffness,
                mass,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let transfers = hierarchy
        .prolongations()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let rows = levels[k + 1].dofmap.dof_to_vertex();
            let cols = levels[k].dofmap.dof_to_vertex();
            p.matrix().submatrix(rows, cols)
        })
        .collect();

    let coarse_factor = cholesky_dense(&levels[0].stiffness.to_dense())?;
    let work = (0..levels.len()).map(|_| AtomicU64::new(0)).collect();
    Ok(MgContext {
        levels,
        transfers,
        coarse_factor,
        smoothing_steps,
        smoother: Smoother::ConjugateGradient,
        work,
        blocks: Mutex::new(HashMap::new()),
    })
}

impl MgContext {
    pub fn with_smoother(mut self, smoother: Smoother) -> Self {
        self.smoother = smoother;
        self
    }

    pub fn smoother(&self) -> Smoother {
        self.smoother
    }

    pub fn smoothing_steps(&self) -> usize {
        self.smoothing_steps
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &MgLevel {
        &self.levels[k]
    }

    pub fn n_dofs(&self, k: usize) -> usize {
        self.levels[k].dofmap.n_dofs()
    }

    pub fn stiffness(&self, k: usize) -> &CsrMatrix {
        &self.levels[k].stiffness
    }

    pub fn mass(&self, k: usize) -> &CsrMatrix {
        &self.levels[k].mass
    }

    pub fn dofmap(&self, k: usize) -> &DofMap {
        &self.levels[k].dofmap
    }

    /// Interior prolongation from level `k` to level `k + 1`.
    pub fn transfer(&self, k: usize) -> &CsrMatrix {
        &self.transfers[k]
    }

    /// Applies the composed interior prolongation from level `from` up to `to`.
    pub fn prolongate(&self, from: usize, to: usize, v: &[f64]) -> Result<Vec<f64>> {
        self.check_level(to)?;
        let mut out = v.to_vec();
        for t in &self.transfers[from..to] {
            out = t.spmv(&out)?;
        }
        Ok(out)
    }

    /// Transpose of [`Self::prolongate`].
    pub fn restrict(&self, from: usize, to: usize, v: &[f64]) -> Result<Vec<f64>> {
        self.check_level(from)?;
        let mut out = v.to_vec();
        for t in self.transfers[to..from].iter().rev() {
            out = t.spmv_transpose(&out)?;
        }
        Ok(out)
    }

    /// Smoothing work so far: sweep-equivalents times level dof count, summed.
    pub fn work_units(&self) -> u64 {
        self.work.iter().map(|w| w.load(Ordering::Relaxed)).sum()
    }

    pub fn work_by_level(&self) -> Vec<u64> {
        self.work.iter().map(|w| w.load(Ordering::Relaxed)).collect()
    }

    pub fn reset_work(&self) {
        self.work.iter().for_each(|w| w.store(0, Ordering::Relaxed));
    }

    fn count_work(&self, level: usize, sweeps: usize) {
        self.work[level].fetch_add((sweeps * self.n_dofs(level)) as u64, Ordering::Relaxed);
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level >= self.levels.len() {
            return Err(Error::LevelOutOfRange {
                level,
                n_levels: self.levels.len(),
            });
        }
        Ok(())
    }

    /// Exact solve with the coarsest-level stiffness.
    pub fn coarse_solve(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n_dofs(0) {
            return Err(Error::DimensionMismatch {
                expected: self.n_dofs(0),
                got: f.len(),
            });
        }
        Ok(self.coarse_factor.solve(f))
    }

    /// Galerkin projection of level `fine` onto the space of level `coarse`.
    /// Cached per `(coarse, fine)` pair.
    pub fn coarse_block(&self, coarse: usize, fine: usize) -> Result<Arc<CoarseBlock>> {
        self.check_level(fine)?;
        if coarse > fine {
            return Err(Error::InvalidArgument(format!("coarse level {coarse} above fine level {fine}")));
        }
        if let Some(b) = self.blocks.lock().expect("cache lock").get(&(coarse, fine)) {
            return Ok(Arc::clone(b));
        }
        let mut p = CsrMatrix::identity(self.n_dofs(coarse));
        for t in &self.transfers[coarse..fine] {
            p = t.matmul(&p)?;
        }
        let pt = p.transpose();
        let project = |m: &CsrMatrix| -> Result<DenseMatrix> {
            let g = pt.matmul(&m.matmul(&p)?)?.to_dense();
            let n = g.n_rows();
            Ok(DenseMatrix::from_fn(n, n, |i, j| 0.5 * (g[(i, j)] + g[(j, i)])))
        };
        let block = Arc::new(CoarseBlock {
            stiffness: project(self.stiffness(fine))?,
            mass: project(self.mass(fine))?,
            prolongation: p,
        });
        self.blocks
            .lock()
            .expect("cache lock")
            .insert((coarse, fine), Arc::clone(&block));
        Ok(block)
    }

    fn smooth(&self, level: usize, f: &[f64], x: &mut [f64], smoother: Smoother) {
        let a = self.stiffness(level);
        match smoother {
            Smoother::ConjugateGradient => {
                let done = cg_steps(a, f, x, self.smoothing_steps);
                self.count_work(level, done);
            }
            Smoother::SymmetricGaussSeidel => {
                for _ in 0..self.smoothing_steps {
                    gauss_seidel_sweep(a, f, x, false);
                    gauss_seidel_sweep(a, f, x, true);
                }
                self.count_work(level, 2 * self.smoothing_steps);
            }
        }
    }

    fn cycle(&self, level: usize, f: &[f64], x: &mut Vec<f64>, smoother: Smoother) -> Result<()> {
        if level == 0 {
            *x = self.coarse_factor.solve(f);
            return Ok(());
        }
        self.smooth(level, f, x, smoother);
        let a = self.stiffness(level);
        let mut r = a.spmv(x)?;
        for (ri, fi) in r.iter_mut().zip(f) {
            *ri = fi - *ri;
        }
        let p = &self.transfers[level - 1];
        let rc = p.spmv_transpose(&r)?;
        let mut ec = vec![0.0; rc.len()];
        self.cycle(level - 1, &rc, &mut ec, smoother)?;
        let e = p.spmv(&ec)?;
        for (xi, ei) in x.iter_mut().zip(&e) {
            *xi += ei;
        }
        self.smooth(level, f, x, smoother);
        Ok(())
    }

    /// One V-cycle with an explicitly chosen smoother.
    pub fn v_cycle_with(&self, level: usize, f: &[f64], x: &[f64], smoother: Smoother) -> Result<Vec<f64>> {
        self.check_level(level)?;
        let n = self.n_dofs(level);
        for len in [f.len(), x.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        let mut out = x.to_vec();
        self.cycle(level, f, &mut out, smoother)?;
        Ok(out)
    }
}

/// Up to `steps` CG iterations on `A x = f` starting from `x`; returns the
/// number actually taken (fewer once the residual vanishes).
fn cg_steps(a: &CsrMatrix, f: &[f64], x: &mut [f64], steps: usize) -> usize {
    let n = x.len();
    let mut r = a.spmv(x).expect("level dimensions");
    for (ri, fi) in r.iter_mut().zip(f) {
        *ri = fi - *ri;
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; n];
    for it in 0..steps {
        if rr == 0.0 {
            return it;
        }
        a.spmv_into(&p, &mut ap).expect("level dimensions");
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return it;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    steps
}

fn gauss_seidel_sweep(a: &CsrMatrix, f: &[f64], x: &mut [f64], backward: bool) {
    let n = x.len();
    let mut relax = |i: usize| {
        let (cols, vals) = a.row(i);
        let mut s = f[i];
        let mut diag = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag = v;
            } else {
                s -= v * x[j];
            }
        }
        x[i] = s / diag;
    };
    if backward {
        (0..n).rev().for_each(&mut relax);
    } else {
        (0..n).for_each(&mut relax);
    }
}

/// One V-cycle with the context's smoother: `ν` smoothing steps, residual
/// restriction, recursion (exact dense solve on level 0), prolongated
/// correction, `ν` smoothing steps.
pub fn v_cycle(ctx: &MgContext, level: usize, f: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    ctx.v_cycle_with(level, f, x, ctx.smoother)
}

/// `m` V-cycles on `A_level x = f` from `x0`.
pub fn mg_solve(ctx: &MgContext, level: usize, f: &[f64], x0: &[f64], m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::InvalidArgument("mg_solve needs at least one cycle".into()));
    }
    let mut x = x0.to_vec();
    for _ in 0..m {
        x = v_cycle(ctx, level, f, &x)?;
    }
    Ok(x)
}
