//! Convergence studies: run the full multigrid scheme and the reference
//! solver across a hierarchy, measure errors, and emit CSV tables.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::clock::Stopwatch;
use crate::eigsolver::{direct_level_solve, full_multigrid_trace, EigenApprox, SolverConfig};
use crate::error::{Error, Result};
use crate::fem::{energy_error_to_function, interpolate, CoefficientField, ConstantCoefficients, VariableCoefficients};
use crate::linalg::dot;
use crate::mesh::{build_hierarchy, load_mesh, unit_square_mesh, Mesh, MeshHierarchy, Point};
use crate::multigrid::{build_mg_context, MgContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// `-Δu = λu` on the unit square.
    Model,
    /// Variable diffusion, reaction and density on the unit square.
    General,
}

impl FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(Self::Model),
            "general" => Ok(Self::General),
            other => Err(Error::InvalidArgument(format!("unknown problem `{other}`"))),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Model => "model",
            Self::General => "general",
        })
    }
}

/// The eigenfunction `2 sin(iπx) sin(jπy)` of the model problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SineMode {
    pub i: u32,
    pub j: u32,
}

impl SineMode {
    pub fn eigenvalue(&self) -> f64 {
        f64::from(self.i * self.i + self.j * self.j) * PI * PI
    }

    pub fn value(&self, x: Point) -> f64 {
        let (a, b) = (f64::from(self.i) * PI, f64::from(self.j) * PI);
        2.0 * (a * x[0]).sin() * (b * x[1]).sin()
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        let (a, b) = (f64::from(self.i) * PI, f64::from(self.j) * PI);
        [
            2.0 * a * (a * x[0]).cos() * (b * x[1]).sin(),
            2.0 * b * (a * x[0]).sin() * (b * x[1]).cos(),
        ]
    }
}

/// The `q` smallest model eigenvalues `(i² + j²)π²` with multiplicity, and
/// their eigenfunctions (ties ordered by `i`).
pub fn model_exact_data(q: usize) -> (Vec<f64>, Vec<SineMode>) {
    let mut modes = Vec::new();
    let mut bound = 1u32;
    loop {
        modes.clear();
        for i in 1..=bound {
            for j in 1..=bound {
                modes.push(SineMode { i, j });
            }
        }
        modes.sort_by_key(|m| (m.i * m.i + m.j * m.j, m.i));
        // every mode with i² + j² <= bound² has been enumerated
        let complete = modes.iter().take_while(|m| m.i * m.i + m.j * m.j <= bound * bound).count();
        if complete >= q {
            modes.truncate(q);
            break;
        }
        bound *= 2;
    }
    (modes.iter().map(SineMode::eigenvalue).collect(), modes)
}

/// A problem to study: coefficients plus exact eigendata when known.
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub coefficients: Box<dyn CoefficientField>,
    pub exact_eigenvalues: Vec<f64>,
    pub exact_modes: Vec<SineMode>,
}

impl ProblemSpec {
    pub fn model(q: usize) -> Self {
        let (exact_eigenvalues, exact_modes) = model_exact_data(q);
        Self {
            kind: ProblemKind::Model,
            coefficients: Box::new(ConstantCoefficients::laplace()),
            exact_eigenvalues,
            exact_modes,
        }
    }

    pub fn general() -> Self {
        Self {
            kind: ProblemKind::General,
            coefficients: Box::new(VariableCoefficients),
            exact_eigenvalues: Vec::new(),
            exact_modes: Vec::new(),
        }
    }

    pub fn new(kind: ProblemKind, q: usize) -> Self {
        match kind {
            ProblemKind::Model => Self::model(q),
            ProblemKind::General => Self::general(),
        }
    }

    /// Whether exact eigenvalue `idx` has multiplicity one.
    fn is_simple(&self, idx: usize) -> bool {
        let v = &self.exact_eigenvalues;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs();
        let before = idx > 0 && close(v[idx - 1], v[idx]);
        let after = idx + 1 < v.len() && close(v[idx + 1], v[idx]);
        // the enumeration is truncated, so a last entry may hide a partner
        let hidden = idx + 1 == v.len() && {
            let (all, _) = model_exact_data(idx + 2);
            close(all[idx + 1], v[idx])
        };
        !(before || after || hidden)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FullMultigrid,
    Direct,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::FullMultigrid => "fmg",
            Self::Direct => "direct",
        }
    }
}

/// Measured quantities for one method on one level.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub method: Method,
    pub level: usize,
    pub n_dofs: usize,
    pub eigenvalues: Vec<f64>,
    /// Reference eigenvalues (exact or extrapolated); `None` when unavailable.
    pub references: Option<Vec<f64>>,
    /// `‖u - u_h‖_a` of the first eigenfunction when it is simple and known.
    pub energy_error: Option<f64>,
    pub work_units: u64,
    pub wall_ms: f64,
}

impl StudyRow {
    pub fn abs_errors(&self) -> Option<Vec<f64>> {
        self.references
            .as_ref()
            .map(|r| self.eigenvalues.iter().zip(r).map(|(l, x)| (l - x).abs()).collect())
    }
}

/// Richardson extrapolation of two eigenvalues on meshes `h` and `h / beta`
/// converging at rate `order`.
pub fn extrapolate_reference(coarse: f64, fine: f64, beta: f64, order: f64) -> f64 {
    fine + (fine - coarse) / (beta.powf(order) - 1.0)
}

/// Errors of `approx` against `reference` (or the exact model data when
/// `reference` is `None`). The energy error of the first eigenfunction is
/// integrated against the exact sine mode, sign-aligned by the mass inner
/// product with its interpolant.
pub fn compute_errors(
    approx: &EigenApprox,
    spec: &ProblemSpec,
    ctx: &MgContext,
    hierarchy: &MeshHierarchy,
    reference: Option<&[f64]>,
) -> Result<StudyRow> {
    let level = approx.level;
    let q = approx.q();
    let references = match (reference, spec.kind) {
        (Some(r), _) => Some(r[..q.min(r.len())].to_vec()),
        (None, ProblemKind::Model) if spec.exact_eigenvalues.len() >= q => Some(spec.exact_eigenvalues[..q].to_vec()),
        _ => None,
    };
    let energy_error = if spec.kind == ProblemKind::Model && !spec.exact_modes.is_empty() && spec.is_simple(0) {
        let mode = spec.exact_modes[0];
        let mesh = hierarchy.mesh(level);
        let dofmap = ctx.dofmap(level);
        let interp = interpolate(mesh, dofmap, |x| mode.value(x));
        let s = if dot(&approx.vectors[0], &ctx.mass(level).spmv(&interp)?) < 0.0 { -1.0 } else { 1.0 };
        let uh: Vec<f64> = approx.vectors[0].iter().map(|v| s * v).collect();
        Some(energy_error_to_function(
            mesh,
            dofmap,
            spec.coefficients.as_ref(),
            &uh,
            |x| mode.value(x),
            |x| mode.gradient(x),
        )?)
    } else {
        None
    };
    Ok(StudyRow {
        method: Method::FullMultigrid,
        level,
        n_dofs: ctx.n_dofs(level),
        eigenvalues: approx.eigenvalues.clone(),
        references,
        energy_error,
        work_units: 0,
        wall_ms: 0.0,
    })
}

/// Where the coarse mesh comes from: a file or `square:NX`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeshSource {
    UnitSquare(usize),
    File(std::path::PathBuf),
}

impl FromStr for MeshSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("square:") {
            Some(nx) => nx
                .parse()
                .map(MeshSource::UnitSquare)
                .map_err(|_| Error::InvalidArgument(format!("bad square size in `{s}`"))),
            None => Ok(MeshSource::File(s.into())),
        }
    }
}

impl MeshSource {
    pub fn load(&self) -> Result<Mesh> {
        match self {
            Self::UnitSquare(nx) => unit_square_mesh(*nx),
            Self::File(path) => load_mesh(&std::fs::read_to_string(path)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub n_levels: usize,
    pub config: SolverConfig,
    pub compare_direct: bool,
    /// Tolerance of the reference solver.
    pub direct_tol: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            n_levels: 1,
            config: SolverConfig::default(),
            compare_direct: false,
            direct_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub rows: Vec<StudyRow>,
    /// Set when no reference eigenvalues were available.
    pub reference_missing: bool,
}

impl Study {
    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &StudyRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }
}

/// Runs the full multigrid scheme on every level of a fresh hierarchy and,
/// when requested, the reference solver on each level too. For problems
/// without exact data the reference eigenvalues are extrapolated from the
/// reference solver on the two finest levels.
pub fn run_study(spec: &ProblemSpec, coarse: Mesh, opts: &StudyOptions) -> Result<Study> {
    opts.config.validate()?;
    let q = opts.config.q;
    let hierarchy = build_hierarchy(coarse, opts.n_levels)?.with_coarse_index(opts.config.coarse_index)?;
    let ctx = build_mg_context(&hierarchy, spec.coefficients.as_ref(), opts.config.nu)?;
    if ctx.n_dofs(0) < q {
        return Err(Error::InvalidArgument(format!(
            "coarse mesh has {} interior dofs, fewer than the {q} requested eigenpairs",
            ctx.n_dofs(0)
        )));
    }
    let n = hierarchy.n_levels();

    ctx.reset_work();
    let trace = full_multigrid_trace(&ctx, &opts.config)?;

    let needs_extrapolation = spec.kind != ProblemKind::Model && n >= 2;
    let mut direct: Vec<Option<(EigenApprox, u64, f64)>> = vec![None; n];
    for (level, slot) in direct.iter_mut().enumerate() {
        let wanted = opts.compare_direct || (needs_extrapolation && level + 2 >= n);
        if wanted {
            let start = Stopwatch::start();
            let w0 = ctx.work_units();
            let approx = direct_level_solve(&ctx, level, q, opts.direct_tol)?;
            *slot = Some((approx, ctx.work_units() - w0, start.elapsed().as_secs_f64() * 1e3));
        }
    }

    let extrapolated: Option<Vec<f64>> = if needs_extrapolation {
        let c = &direct[n - 2].as_ref().expect("solved above").0;
        let f = &direct[n - 1].as_ref().expect("solved above").0;
        Some(
            c.eigenvalues
                .iter()
                .zip(&f.eigenvalues)
                .map(|(&lc, &lf)| extrapolate_reference(lc, lf, hierarchy.beta() as f64, 2.0))
                .collect(),
        )
    } else {
        None
    };
    let reference = extrapolated.as_deref();

    let mut rows = Vec::new();
    for report in &trace {
        let mut row = compute_errors(&report.approx, spec, &ctx, &hierarchy, reference)?;
        row.work_units = report.work_units;
        row.wall_ms = report.elapsed.as_secs_f64() * 1e3;
        rows.push(row);
    }
    if opts.compare_direct {
        for (approx, work, ms) in direct.iter().flatten() {
            let mut row = compute_errors(approx, spec, &ctx, &hierarchy, reference)?;
            row.method = Method::Direct;
            row.work_units = *work;
            row.wall_ms = *ms;
            rows.push(row);
        }
    }
    let reference_missing = rows.iter().any(|r| r.references.is_none());
    Ok(Study {
        rows,
        reference_missing,
    })
}

pub const CSV_HEADER: &str = "method,level,n_dofs,eig_index,lambda_h,lambda_ref,abs_err,energy_err,work_units,wall_ms";

/// Writes one CSV line per (row, eigenvalue). Missing values are left empty;
/// `energy_err` is the true energy-norm error of the first eigenfunction.
/// With `timings = false` the wall-clock column is written as 0 so that
/// output is reproducible byte for byte.
pub fn write_csv<W: Write>(mut out: W, rows: &[StudyRow], timings: bool) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        let errors = row.abs_errors();
        for (j, lambda) in row.eigenvalues.iter().enumerate() {
            let reference = row.references.as_ref().and_then(|r| r.get(j));
            let err = errors.as_ref().and_then(|e| e.get(j));
            let energy = if j == 0 { row.energy_error } else { None };
            let opt = |v: Option<&f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                row.method.as_str(),
                row.level,
                row.n_dofs,
                j,
                lambda,
                opt(reference),
                opt(err),
                opt(energy.as_ref()),
                row.work_units,
                if timings { format!("{:.3}", row.wall_ms) } else { "0".into() },
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_model_eigenvalue() {
        let (vals, modes) = model_exact_data(1);
        assert!((vals[0] - 19.739_208_8).abs() < 1e-7);
        assert_eq!(modes[0], SineMode { i: 1, j: 1 });
    }

    #[test]
    fn six_model_eigenvalues() {
        let (vals, _) = model_exact_data(6);
        let expected = [2.0, 5.0, 5.0, 8.0, 10.0, 10.0];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e * PI * PI).abs() < 1e-12);
        }
        let (more, _) = model_exact_data(12);
        assert!(more.windows(2).all(|w| w[0] <= w[1]));
        assert!((more[6] - 13.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn sine_mode_is_b_normalized() {
        // midpoint rule on a fine grid: ∫(2 sin πx sin πy)² = 1
        let mode = SineMode { i: 1, j: 1 };
        let n = 400;
        let h = 1.0 / n as f64;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                let x = [(a as f64 + 0.5) * h, (b as f64 + 0.5) * h];
                s += mode.value(x).powi(2) * h * h;
            }
        }
        assert!((s - 1.0).abs() < 1e-10, "{s}");
    }

    #[test]
    fn extrapolation_algebra() {
        assert_eq!(extrapolate_reference(3.5, 3.5, 2.0, 2.0), 3.5);
        // λ_h = λ* + C h²
        let (star, c, h) = (7.25, 3.0, 0.125);
        let coarse = star + c * h * h;
        let fine = star + c * (h / 2.0) * (h / 2.0);
        assert!((extrapolate_reference(coarse, fine, 2.0, 2.0) - star).abs() < 1e-14);
    }

    #[test]
    fn mesh_source_parsing() {
        assert_eq!("square:8".parse::<MeshSource>().unwrap(), MeshSource::UnitSquare(8));
        assert!("square:x".parse::<MeshSource>().is_err());
        assert_eq!(
            "m.txt".parse::<MeshSource>().unwrap(),
            MeshSource::File("m.txt".into())
        );
    }

    #[test]
    fn simplicity() {
        let spec = ProblemSpec::model(6);
        assert!(spec.is_simple(0));
        assert!(!spec.is_simple(1));
        assert!(!ProblemSpec::model(2).is_simple(1));
        assert!(spec.is_simple(3));
    }

    #[test]
    fn exact_values_give_zero_error() {
        let spec = ProblemSpec::model(1);
        let hierarchy = build_hierarchy(unit_square_mesh(4).unwrap(), 1).unwrap();
        let ctx = build_mg_context(&hierarchy, spec.coefficients.as_ref(), 2).unwrap();
        let approx = EigenApprox {
            level: 0,
            eigenvalues: vec![2.0 * PI * PI],
            vectors: vec![vec![1.0; ctx.n_dofs(0)]],
        };
        let row = compute_errors(&approx, &spec, &ctx, &hierarchy, None).unwrap();
        assert_eq!(row.abs_errors().unwrap(), vec![0.0]);
    }

    #[test]
    fn csv_has_one_line_per_eigenvalue() {
        let row = StudyRow {
            method: Method::Direct,
            level: 2,
            n_dofs: 9,
            eigenvalues: vec![1.0, 2.0],
            references: None,
            energy_error: None,
            work_units: 12,
            wall_ms: 3.25,
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row], false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "direct,2,9,0,1,,,,12,0");
        assert_eq!(lines[2], "direct,2,9,1,2,,,,12,0");
    }
}
