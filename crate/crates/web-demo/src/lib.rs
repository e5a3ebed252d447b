//! Browser bindings for the multigrid eigensolver: eigenmode fields for
//! drawing, mesh hierarchies, and small convergence studies as CSV.

use fmg_eig::eigsolver::{full_multigrid, SolverConfig};
use fmg_eig::fem::DofMap;
use fmg_eig::harness::{run_study, write_csv, ProblemKind, ProblemSpec, StudyOptions};
use fmg_eig::mesh::{build_hierarchy_with_cap, unit_square_mesh, Mesh};
use wasm_bindgen::prelude::*;

/// Keeps the page responsive: refuse hierarchies finer than this.
const MAX_VERTICES: usize = 300_000;

/// A P1 field on a triangulation, flattened for canvas drawing.
#[wasm_bindgen]
pub struct Field {
    vertices: Vec<f64>,
    triangles: Vec<u32>,
    values: Vec<f64>,
    eigenvalue: f64,
}

#[wasm_bindgen]
impl Field {
    /// `x0, y0, x1, y1, ...`
    #[wasm_bindgen(getter)]
    pub fn vertices(&self) -> Vec<f64> {
        self.vertices.clone()
    }

    /// Vertex indices, three per triangle.
    #[wasm_bindgen(getter)]
    pub fn triangles(&self) -> Vec<u32> {
        self.triangles.clone()
    }

    /// One value per vertex, zero on the boundary.
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn eigenvalue(&self) -> f64 {
        self.eigenvalue
    }
}

fn problem(name: &str, q: usize) -> Result<ProblemSpec, String> {
    let kind: ProblemKind = name.parse().map_err(|e: fmg_eig::Error| e.to_string())?;
    Ok(ProblemSpec::new(kind, q))
}

fn flatten(mesh: &Mesh, values: Vec<f64>, eigenvalue: f64) -> Field {
    Field {
        vertices: mesh.vertices().iter().flat_map(|p| [p[0], p[1]]).collect(),
        triangles: mesh.triangles().iter().flatten().map(|&i| i as u32).collect(),
        values,
        eigenvalue,
    }
}

pub fn eigenmode_field(problem_name: &str, nx: usize, levels: usize, index: usize) -> Result<Field, String> {
    let spec = problem(problem_name, index + 1)?;
    let hierarchy = build_hierarchy_with_cap(unit_square_mesh(nx).map_err(|e| e.to_string())?, levels, MAX_VERTICES)
        .map_err(|e| e.to_string())?;
    let config = SolverConfig { q: index + 1, ..SolverConfig::default() };
    let approx = full_multigrid(&hierarchy, spec.coefficients.as_ref(), &config).map_err(|e| e.to_string())?;
    let mesh = hierarchy.finest();
    let values = DofMap::new(mesh).extend_by_zero(&approx.vectors[index]);
    Ok(flatten(mesh, values, approx.eigenvalues[index]))
}

pub fn mesh_level_field(nx: usize, level: usize) -> Result<Field, String> {
    let hierarchy = build_hierarchy_with_cap(unit_square_mesh(nx).map_err(|e| e.to_string())?, level + 1, MAX_VERTICES)
        .map_err(|e| e.to_string())?;
    let mesh = hierarchy.finest();
    // colour vertices by the level on which they first appear
    let mut born = vec![level as f64; mesh.n_vertices()];
    for (k, m) in hierarchy.meshes().iter().enumerate().rev() {
        born[..m.n_vertices()].iter_mut().for_each(|b| *b = k as f64);
    }
    Ok(flatten(mesh, born, f64::NAN))
}

pub fn study_csv(problem_name: &str, nx: usize, levels: usize, q: usize, compare_direct: bool) -> Result<String, String> {
    let spec = problem(problem_name, q)?;
    let coarse = unit_square_mesh(nx).map_err(|e| e.to_string())?;
    let opts = StudyOptions {
        n_levels: levels,
        config: SolverConfig { q, ..SolverConfig::default() },
        compare_direct,
        ..StudyOptions::default()
    };
    let study = run_study(&spec, coarse, &opts).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    write_csv(&mut out, &study.rows, false).map_err(|e| e.to_string())?;
    String::from_utf8(out).map_err(|e| e.to_string())
}

/// Eigenfunction `index` (0-based) computed by full multigrid on a
/// `levels`-level hierarchy over the `nx × nx` unit square.
#[wasm_bindgen]
pub fn eigenmode(problem_name: &str, nx: usize, levels: usize, index: usize) -> Result<Field, JsError> {
    eigenmode_field(problem_name, nx, levels, index).map_err(|e| JsError::new(&e))
}

/// Finest mesh of a hierarchy; `values` hold each vertex's level of birth.
#[wasm_bindgen]
pub fn mesh_level(nx: usize, level: usize) -> Result<Field, JsError> {
    mesh_level_field(nx, level).map_err(|e| JsError::new(&e))
}

/// Convergence study table in the CLI's CSV format (wall time column zero).
#[wasm_bindgen]
pub fn study(problem_name: &str, nx: usize, levels: usize, q: usize, compare_direct: bool) -> Result<String, JsError> {
    study_csv(problem_name, nx, levels, q, compare_direct).map_err(|e| JsError::new(&e))
}
