//! P1 finite element assembly of the stiffness form
//! `a(u,v) = ∫ ∇u·A∇v + φ u v` and the weighted mass form `b(u,v) = ∫ ρ u v`
//! over interior degrees of freedom (homogeneous Dirichlet data eliminated).

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{Mesh, Point};

/// Problem data: diffusion tensor, reaction and mass density as functions of
/// position. Implementations must be pure.
pub trait CoefficientField: Send + Sync {
    /// Symmetric positive definite diffusion tensor.
    fn diffusion(&self, x: Point) -> [[f64; 2]; 2];
    /// Nonnegative reaction coefficient.
    fn reaction(&self, x: Point) -> f64;
    /// Positive density weighting the mass form.
    fn density(&self, x: Point) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantCoefficients {
    pub diffusion: [[f64; 2]; 2],
    pub reaction: f64,
    pub density: f64,
}

impl ConstantCoefficients {
    /// `-Δu = λu`.
    pub fn laplace() -> Self {
        Self {
            diffusion: [[1.0, 0.0], [0.0, 1.0]],
            reaction: 0.0,
            density: 1.0,
        }
    }
}

impl CoefficientField for ConstantCoefficients {
    fn diffusion(&self, _: Point) -> [[f64; 2]; 2] {
        self.diffusion
    }
    fn reaction(&self, _: Point) -> f64 {
        self.reaction
    }
    fn density(&self, _: Point) -> f64 {
        self.density
    }
}

/// Smooth variable coefficients on the unit square, centered at (½, ½):
/// `A = I + d dᵀ` with `d = x - c`, `φ = exp(d₁ d₂)`, `ρ = 1 + d₁ d₂`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VariableCoefficients;

impl CoefficientField for VariableCoefficients {
    fn diffusion(&self, x: Point) -> [[f64; 2]; 2] {
        let (d1, d2) = (x[0] - 0.5, x[1] - 0.5);
        [[1.0 + d1 * d1, d1 * d2], [d1 * d2, 1.0 + d2 * d2]]
    }
    fn reaction(&self, x: Point) -> f64 {
        ((x[0] - 0.5) * (x[1] - 0.5)).exp()
    }
    fn density(&self, x: Point) -> f64 {
        1.0 + (x[0] - 0.5) * (x[1] - 0.5)
    }
}

/// Numbering of the interior (non-boundary) vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    vertex_to_dof: Vec<Option<usize>>,
    dof_to_vertex: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let mut vertex_to_dof = vec![None; mesh.n_vertices()];
        let mut dof_to_vertex = Vec::new();
        for (v, slot) in vertex_to_dof.iter_mut().enumerate() {
            if !mesh.is_boundary(v) {
                *slot = Some(dof_to_vertex.len());
                dof_to_vertex.push(v);
            }
        }
        Self {
            vertex_to_dof,
            dof_to_vertex,
        }
    }

    /// Identity numbering of every vertex (no Dirichlet elimination).
    pub fn all_vertices(mesh: &Mesh) -> Self {
        let n = mesh.n_vertices();
        Self {
            vertex_to_dof: (0..n).map(Some).collect(),
            dof_to_vertex: (0..n).collect(),
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_to_vertex.len()
    }

    pub fn dof(&self, vertex: usize) -> Option<usize> {
        self.vertex_to_dof[vertex]
    }

    pub fn vertex(&self, dof: usize) -> usize {
        self.dof_to_vertex[dof]
    }

    pub fn dof_to_vertex(&self) -> &[usize] {
        &self.dof_to_vertex
    }

    /// Scatters a dof vector to all vertices, zero on the boundary.
    pub fn extend_by_zero(&self, dofs: &[f64]) -> Vec<f64> {
        self.vertex_to_dof
            .iter()
            .map(|d| d.map_or(0.0, |d| dofs[d]))
            .collect()
    }
}

type Local = [[f64; 3]; 3];

/// Barycentric coordinates at the three edge midpoints (weights `area / 3`).
const MIDPOINT_BARY: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];

fn quadrature_points(p: &[Point; 3]) -> [Point; 3] {
    MIDPOINT_BARY.map(|b| {
        [
            b[0] * p[0][0] + b[1] * p[1][0] + b[2] * p[2][0],
            b[0] * p[0][1] + b[1] * p[1][1] + b[2] * p[2][1],
        ]
    })
}

fn area_and_gradients(p: &[Point; 3]) -> (f64, [[f64; 2]; 3]) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let s = 1.0 / (2.0 * area);
    let grads = [0, 1, 2].map(|i| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        [(p[j][1] - p[k][1]) * s, (p[k][0] - p[j][0]) * s]
    });
    (area, grads)
}

fn non_finite(what: &str) -> String {
    format!("{what} is not finite at a quadrature point")
}

/// Element matrix of `a(·,·)` on one triangle. The `Err` payload is a
/// description of the offending coefficient.
pub fn local_stiffness(p: &[Point; 3], coeff: &dyn CoefficientField) -> std::result::Result<Local, String> {
    let (area, g) = area_and_gradients(p);
    let w = area / 3.0;
    let mut k = [[0.0; 3]; 3];
    for (x, bary) in quadrature_points(p).into_iter().zip(MIDPOINT_BARY) {
        let a = coeff.diffusion(x);
        let phi = coeff.reaction(x);
        if a.iter().flatten().any(|v| !v.is_finite()) {
            return Err(non_finite("diffusion"));
        }
        if !phi.is_finite() {
            return Err(non_finite("reaction"));
        }
        for i in 0..3 {
            let agi = [
                a[0][0] * g[i][0] + a[0][1] * g[i][1],
                a[1][0] * g[i][0] + a[1][1] * g[i][1],
            ];
            for j in i..3 {
                let v = w * (agi[0] * g[j][0] + agi[1] * g[j][1] + phi * bary[i] * bary[j]);
                k[i][j] += v;
            }
        }
    }
    for i in 0..3 {
        for j in 0..i {
            k[i][j] = k[j][i];
        }
    }
    Ok(k)
}

/// Element matrix of the `rho`-weighted mass form on one triangle.
pub fn local_mass(p: &[Point; 3], rho: &dyn Fn(Point) -> f64) -> std::result::Result<Local, String> {
    let (area, _) = area_and_gradients(p);
    let w = area / 3.0;
    let mut m = [[0.0; 3]; 3];
    for (x, bary) in quadrature_points(p).into_iter().zip(MIDPOINT_BARY) {
        let r = rho(x);
        if !r.is_finite() {
            return Err(non_finite("density"));
        }
        for i in 0..3 {
            for j in i..3 {
                m[i][j] += w * r * bary[i] * bary[j];
            }
        }
    }
    for i in 0..3 {
        for j in 0..i {
            m[i][j] = m[j][i];
        }
    }
    Ok(m)
}

fn assemble<F>(mesh: &Mesh, dofmap: &DofMap, mut local: F) -> Result<CsrMatrix>
where
    F: FnMut(&[Point; 3]) -> std::result::Result<Local, String>,
{
    let verts = mesh.vertices();
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = tri.map(|v| verts[v]);
        let k = local(&p).map_err(|msg| Error::Assembly { triangle: t, msg })?;
        let dofs = tri.map(|v| dofmap.dof(v));
        for i in 0..3 {
            let Some(di) = dofs[i] else { continue };
            triplets.push((di, di, k[i][i]));
            for j in i + 1..3 {
                let Some(dj) = dofs[j] else { continue };
                // one value feeds both halves, so the result is exactly symmetric
                triplets.push((di, dj, k[i][j]));
                triplets.push((dj, di, k[i][j]));
            }
        }
    }
    let n = dofmap.n_dofs();
    CsrMatrix::from_triplets(n, n, &triplets)
}

/// Discrete `a(ψ_i, ψ_j)` over the dofs of `dofmap`.
pub fn assemble_stiffness(mesh: &Mesh, dofmap: &DofMap, coeff: &dyn CoefficientField) -> Result<CsrMatrix> {
    assemble(mesh, dofmap, |p| local_stiffness(p, coeff))
}

/// Discrete `∫ ρ ψ_i ψ_j` over the dofs of `dofmap`.
pub fn assemble_mass(mesh: &Mesh, dofmap: &DofMap, rho: &dyn Fn(Point) -> f64) -> Result<CsrMatrix> {
    assemble(mesh, dofmap, |p| local_mass(p, rho))
}

/// `sqrt(vᵀ M v)`. Round-off down to `-1e-14` is clamped to zero.
pub fn matrix_norm(m: &CsrMatrix, v: &[f64]) -> Result<f64> {
    let q = m.quadratic_form(v)?;
    if q < -1e-14 {
        return Err(Error::NotPsd(q));
    }
    Ok(q.max(0.0).sqrt())
}

/// Energy norm `‖v‖_a` for the stiffness matrix `a`.
pub fn norm_a(a: &CsrMatrix, v: &[f64]) -> Result<f64> {
    matrix_norm(a, v)
}

/// `‖v‖_b` for the mass matrix `b`.
pub fn norm_b(b: &CsrMatrix, v: &[f64]) -> Result<f64> {
    matrix_norm(b, v)
}

/// Nodal interpolant at interior vertices, in dof order.
pub fn interpolate(mesh: &Mesh, dofmap: &DofMap, f: impl Fn(Point) -> f64) -> Vec<f64> {
    dofmap
        .dof_to_vertex()
        .iter()
        .map(|&v| f(mesh.vertices()[v]))
        .collect()
}

/// Edge-midpoint rule is exact to degree 2; this 7-point rule (degree 5) is
/// used only to measure errors against smooth reference functions.
const DUNAVANT5: [(f64, [f64; 3]); 7] = {
    const A1: f64 = 0.059_715_871_789_770;
    const B1: f64 = 0.470_142_064_105_115;
    const A2: f64 = 0.797_426_985_353_087;
    const B2: f64 = 0.101_286_507_323_456;
    const W1: f64 = 0.132_394_152_788_506;
    const W2: f64 = 0.125_939_180_544_827;
    [
        (0.225, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
        (W1, [A1, B1, B1]),
        (W1, [B1, A1, B1]),
        (W1, [B1, B1, A1]),
        (W2, [A2, B2, B2]),
        (W2, [B2, A2, B2]),
        (W2, [B2, B2, A2]),
    ]
};

/// Energy-norm distance `(∫ ∇e·A∇e + φ e²)^½` between a smooth function `u`
/// (with gradient `grad_u`) and the P1 function with dof values `uh`.
pub fn energy_error_to_function(
    mesh: &Mesh,
    dofmap: &DofMap,
    coeff: &dyn CoefficientField,
    uh: &[f64],
    u: impl Fn(Point) -> f64,
    grad_u: impl Fn(Point) -> [f64; 2],
) -> Result<f64> {
    if uh.len() != dofmap.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: dofmap.n_dofs(),
            got: uh.len(),
        });
    }
    let full = dofmap.extend_by_zero(uh);
    let verts = mesh.vertices();
    let mut total = 0.0;
    for tri in mesh.triangles() {
        let p = tri.map(|v| verts[v]);
        let vals = tri.map(|v| full[v]);
        let (area, g) = area_and_gradients(&p);
        let grad_h = [
            vals[0] * g[0][0] + vals[1] * g[1][0] + vals[2] * g[2][0],
            vals[0] * g[0][1] + vals[1] * g[1][1] + vals[2] * g[2][1],
        ];
        for (w, b) in DUNAVANT5 {
            let x = [
                b[0] * p[0][0] + b[1] * p[1][0] + b[2] * p[2][0],
                b[0] * p[0][1] + b[1] * p[1][1] + b[2] * p[2][1],
            ];
            let gu = grad_u(x);
            let e = [gu[0] - grad_h[0], gu[1] - grad_h[1]];
            let a = coeff.diffusion(x);
            let ae = [a[0][0] * e[0] + a[0][1] * e[1], a[1][0] * e[0] + a[1][1] * e[1]];
            let uh_x = b[0] * vals[0] + b[1] * vals[1] + b[2] * vals[2];
            let ev = u(x) - uh_x;
            total += w * area * (e[0] * ae[0] + e[1] * ae[1] + coeff.reaction(x) * ev * ev);
        }
    }
    Ok(total.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_mesh;

    const REF: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    #[test]
    fn reference_stiffness() {
        let k = local_stiffness(&REF, &ConstantCoefficients::laplace()).unwrap();
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expected[i][j]).abs() < 1e-15, "{i}{j}");
            }
        }
    }

    #[test]
    fn reference_mass() {
        let m = local_mass(&REF, &|_| 1.0).unwrap();
        let area = 0.5;
        for i in 0..3 {
            for j in 0..3 {
                let e = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((m[i][j] - e).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn full_laplacian_rows_sum_to_zero() {
        let mesh = unit_square_mesh(5).unwrap();
        let k = assemble_stiffness(&mesh, &DofMap::all_vertices(&mesh), &ConstantCoefficients::laplace()).unwrap();
        let ones = vec![1.0; mesh.n_vertices()];
        let s = k.spmv(&ones).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn reaction_adds_mass() {
        let mesh = unit_square_mesh(4).unwrap();
        let dm = DofMap::new(&mesh);
        let mut c = ConstantCoefficients::laplace();
        let k0 = assemble_stiffness(&mesh, &dm, &c).unwrap();
        c.reaction = 1.0;
        let k1 = assemble_stiffness(&mesh, &dm, &c).unwrap();
        let m = assemble_mass(&mesh, &dm, &|_| 1.0).unwrap();
        for i in 0..dm.n_dofs() {
            for j in 0..dm.n_dofs() {
                assert!((k1.get(i, j) - k0.get(i, j) - m.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mass_integrates_domain_area() {
        let mesh = unit_square_mesh(6).unwrap();
        let m = assemble_mass(&mesh, &DofMap::all_vertices(&mesh), &|_| 1.0).unwrap();
        let total: f64 = m.values().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_mass_integrates_density() {
        let mesh = unit_square_mesh(16).unwrap();
        let rho = |x: Point| VariableCoefficients.density(x);
        let m = assemble_mass(&mesh, &DofMap::all_vertices(&mesh), &rho).unwrap();
        let total: f64 = m.values().iter().sum();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
    }

    #[test]
    fn assembled_matrices_exactly_symmetric() {
        let mesh = unit_square_mesh(7).unwrap();
        let dm = DofMap::new(&mesh);
        let k = assemble_stiffness(&mesh, &dm, &VariableCoefficients).unwrap();
        let m = assemble_mass(&mesh, &dm, &|x| VariableCoefficients.density(x)).unwrap();
        assert_eq!(k.symmetry_defect(), 0.0);
        assert_eq!(m.symmetry_defect(), 0.0);
    }

    #[test]
    fn non_finite_coefficient_names_triangle() {
        let mesh = unit_square_mesh(2).unwrap();
        let dm = DofMap::new(&mesh);
        let err = assemble_mass(&mesh, &dm, &|x| if x[0] > 0.9 { f64::NAN } else { 1.0 }).unwrap_err();
        assert!(matches!(err, Error::Assembly { triangle: 2, .. }), "{err:?}");
    }

    #[test]
    fn dofmap_counts() {
        let mesh = unit_square_mesh(4).unwrap();
        let dm = DofMap::new(&mesh);
        assert_eq!(dm.n_dofs(), mesh.n_vertices() - mesh.n_boundary());
        assert_eq!(dm.n_dofs(), 9);
        for v in 0..mesh.n_vertices() {
            assert_eq!(dm.dof(v).is_none(), mesh.is_boundary(v));
        }
    }

    #[test]
    fn norms() {
        let id = CsrMatrix::identity(2);
        assert_eq!(norm_a(&id, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(norm_b(&id, &[3.0, 4.0]).unwrap(), 5.0);
        let neg = CsrMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]).unwrap();
        assert!(matches!(matrix_norm(&neg, &[1.0]), Err(Error::NotPsd(_))));
    }

    #[test]
    fn rayleigh_quotient_of_interpolant() {
        use std::f64::consts::PI;
        let mesh = unit_square_mesh(64).unwrap();
        let dm = DofMap::new(&mesh);
        let k = assemble_stiffness(&mesh, &dm, &ConstantCoefficients::laplace()).unwrap();
        let m = assemble_mass(&mesh, &dm, &|_| 1.0).unwrap();
        let u = interpolate(&mesh, &dm, |x| 2.0 * (PI * x[0]).sin() * (PI * x[1]).sin());
        let rq = (norm_a(&k, &u).unwrap() / norm_b(&m, &u).unwrap()).powi(2);
        let lam = 2.0 * PI * PI;
        assert!(rq >= lam && rq <= 1.01 * lam, "{rq}");
    }

    #[test]
    fn interpolation() {
        let mesh = unit_square_mesh(2).unwrap();
        let dm = DofMap::new(&mesh);
        assert_eq!(interpolate(&mesh, &dm, |_| 0.0), vec![0.0]);
        assert_eq!(interpolate(&mesh, &dm, |x| x[0] + x[1]), vec![1.0]);
        let fine = unit_square_mesh(8).unwrap();
        let dmf = DofMap::new(&fine);
        let v = interpolate(&fine, &dmf, |x| {
            2.0 * (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin()
        });
        assert!(v.iter().all(|&x| x > 0.0 && x <= 2.0));
    }

    #[test]
    fn energy_error_vanishes_for_linears() {
        // u = x + y is reproduced exactly on the full (Neumann-free) dof set
        let mesh = unit_square_mesh(3).unwrap();
        let dm = DofMap::all_vertices(&mesh);
        let uh = interpolate(&mesh, &dm, |x| x[0] + x[1]);
        let e = energy_error_to_function(
            &mesh,
            &dm,
            &VariableCoefficients,
            &uh,
            |x| x[0] + x[1],
            |_| [1.0, 1.0],
        )
        .unwrap();
        assert!(e < 1e-12, "{e}");
    }
}
