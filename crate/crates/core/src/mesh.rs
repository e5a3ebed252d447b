//! Conforming triangulations of 2D polygonal domains, regular refinement and
//! nested mesh hierarchies with their coarse-to-fine prolongations.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

pub type Point = [f64; 2];

/// A conforming triangulation with counterclockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    level: usize,
}

fn signed_area(p: Point, q: Point, r: Point) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Why a candidate triangulation was rejected, with the offending triangle.
#[derive(Debug)]
enum MeshDefect {
    IndexOutOfRange(usize),
    NonPositiveArea(usize),
    NonConforming(usize),
}

impl Mesh {
    /// Validates connectivity and derives boundary flags from edge incidence.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, level: usize) -> Result<Self> {
        Self::build(vertices, triangles, level).map_err(|d| match d {
            MeshDefect::IndexOutOfRange(t) => {
                Error::InvalidArgument(format!("triangle {t} references a missing vertex"))
            }
            MeshDefect::NonPositiveArea(t) => {
                Error::InvalidArgument(format!("triangle {t} has non-positive area"))
            }
            MeshDefect::NonConforming(t) => {
                Error::InvalidArgument(format!("triangle {t} breaks conformity"))
            }
        })
    }

    fn build(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        level: usize,
    ) -> std::result::Result<Self, MeshDefect> {
        let nv = vertices.len();
        // directed edge -> owning triangle
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(MeshDefect::IndexOutOfRange(t));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(MeshDefect::NonPositiveArea(t));
            }
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if directed.insert(e, t).is_some() {
                    // same directed edge twice: overlap or an edge shared by 3+ triangles
                    return Err(MeshDefect::NonConforming(t));
                }
            }
        }
        let mut boundary = vec![false; nv];
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                boundary[a] = true;
                boundary[b] = true;
            }
        }
        Ok(Self {
            vertices,
            triangles,
            boundary,
            level,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.iter().filter(|&&b| b).count()
    }

    /// Unique undirected edges in first-encounter order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = HashMap::with_capacity(2 * self.n_vertices());
        let mut out = Vec::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let e = edge_key(tri[k], tri[(k + 1) % 3]);
                if seen.insert(e, ()).is_none() {
                    out.push(e);
                }
            }
        }
        out
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Mesh size `h`: the longest edge.
    pub fn max_edge_length(&self) -> f64 {
        self.edges()
            .into_iter()
            .map(|(a, b)| {
                let (p, q) = (self.vertices[a], self.vertices[b]);
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Writes the `NV NT` / `x y` / `i j k` text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n_vertices(), self.n_triangles());
        for p in &self.vertices {
            let _ = writeln!(out, "{:.16e} {:.16e}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        out
    }
}

/// Structured triangulation of the unit square: an `nx × nx` grid of squares,
/// each cut along its lower-left to upper-right diagonal.
pub fn unit_square_mesh(nx: usize) -> Result<Mesh> {
    if nx == 0 {
        return Err(Error::InvalidArgument("nx must be positive".into()));
    }
    let n1 = nx + 1;
    let mut vertices = Vec::with_capacity(n1 * n1);
    for j in 0..n1 {
        for i in 0..n1 {
            vertices.push([i as f64 / nx as f64, j as f64 / nx as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * nx);
    for j in 0..nx {
        for i in 0..nx {
            let v00 = j * n1 + i;
            let v10 = v00 + 1;
            let v01 = v00 + n1;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::new(vertices, triangles, 0)
}

/// Parses the mesh text format. Blank lines are skipped and anything after
/// `x y` on a vertex line (such as a boundary marker) is ignored: boundary
/// flags are always recomputed from connectivity.
pub fn load_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let bad = |line: usize, msg: &str| Error::Parse {
        line,
        msg: msg.to_string(),
    };

    let (hline, header) = lines.next().ok_or_else(|| bad(1, "empty mesh file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 2 {
        return Err(bad(hline, "expected `NV NT`"));
    }
    let nv: usize = h[0].parse().map_err(|_| bad(hline, "bad vertex count"))?;
    let nt: usize = h[1].parse().map_err(|_| bad(hline, "bad triangle count"))?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| bad(hline, "file ends before all vertices"))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() < 2 {
            return Err(bad(ln, "expected `x y`"));
        }
        let x: f64 = f[0].parse().map_err(|_| bad(ln, "bad x coordinate"))?;
        let y: f64 = f[1].parse().map_err(|_| bad(ln, "bad y coordinate"))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(bad(ln, "non-finite coordinate"));
        }
        vertices.push([x, y]);
    }

    let mut triangles = Vec::with_capacity(nt);
    let mut tri_lines = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = lines.next().ok_or_else(|| bad(hline, "file ends before all triangles"))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad(ln, "expected `i j k`"));
        }
        let mut tri = [0usize; 3];
        for (slot, s) in tri.iter_mut().zip(&f) {
            *slot = s.parse().map_err(|_| bad(ln, "bad vertex index"))?;
            if *slot >= nv {
                return Err(bad(ln, &format!("vertex index {} out of range (NV = {nv})", *slot)));
            }
        }
        triangles.push(tri);
        tri_lines.push(ln);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(bad(ln, "trailing content after the last triangle"));
    }

    Mesh::build(vertices, triangles, 0).map_err(|d| match d {
        MeshDefect::IndexOutOfRange(t) => bad(tri_lines[t], "vertex index out of range"),
        MeshDefect::NonPositiveArea(t) => bad(tri_lines[t], "zero or negative triangle area"),
        MeshDefect::NonConforming(t) => bad(tri_lines[t], "non-conforming triangulation"),
    })
}

/// Coarse-to-fine interpolation of P1 coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Prolongation {
    matrix: CsrMatrix,
}

impl Prolongation {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn n_coarse(&self) -> usize {
        self.matrix.n_cols()
    }

    pub fn n_fine(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn apply(&self, coarse: &[f64]) -> Result<Vec<f64>> {
        self.matrix.spmv(coarse)
    }

    /// Composition `other ∘ self` (first `self`, then `other`).
    pub fn then(&self, other: &Prolongation) -> Result<Prolongation> {
        Ok(Prolongation {
            matrix: other.matrix.matmul(&self.matrix)?,
        })
    }
}

/// Splits every triangle into four congruent children through its edge
/// midpoints. Fine vertices are the coarse vertices followed by one midpoint
/// per coarse edge, numbered in order of first encounter.
pub fn refine_regular(mesh: &Mesh) -> Result<(Mesh, Prolongation)> {
    let nv = mesh.n_vertices();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * mesh.n_triangles());
    let mut vertices = mesh.vertices.clone();
    let mut triplets: Vec<(usize, usize, f64)> = (0..nv).map(|i| (i, i, 1.0)).collect();

    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        *midpoint.entry(edge_key(a, b)).or_insert_with(|| {
            let (p, q) = (vertices[a], vertices[b]);
            let id = vertices.len();
            vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            triplets.push((id, a, 0.5));
            triplets.push((id, b, 0.5));
            id
        })
    };

    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    for &[a, b, c] in &mesh.triangles {
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let nf = vertices.len();
    let fine = Mesh::new(vertices, triangles, mesh.level + 1)?;
    let matrix = CsrMatrix::from_triplets(nf, nv, &triplets)?;
    Ok((fine, Prolongation { matrix }))
}

/// Largest fine-level vertex count a hierarchy may reach by default.
pub const DEFAULT_VERTEX_CAP: usize = 20_000_000;

/// Nested meshes, coarse to fine, with the prolongation between each pair.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    meshes: Vec<Mesh>,
    prolongations: Vec<Prolongation>,
    coarse_index: usize,
    beta: usize,
}

impl MeshHierarchy {
    pub fn meshes(&self) -> &[Mesh] {
        &self.meshes
    }

    pub fn mesh(&self, level: usize) -> &Mesh {
        &self.meshes[level]
    }

    pub fn finest(&self) -> &Mesh {
        self.meshes.last().expect("hierarchy is never empty")
    }

    pub fn prolongations(&self) -> &[Prolongation] {
        &self.prolongations
    }

    pub fn n_levels(&self) -> usize {
        self.meshes.len()
    }

    /// Level whose space plays the role of the coarse correction space.
    pub fn coarse_index(&self) -> usize {
        self.coarse_index
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    pub fn with_coarse_index(mut self, index: usize) -> Result<Self> {
        if index >= self.n_levels() {
            return Err(Error::LevelOutOfRange {
                level: index,
                n_levels: self.n_levels(),
            });
        }
        self.coarse_index = index;
        Ok(self)
    }

    /// Composed prolongation from level `from` to level `to >= from`.
    pub fn prolongation_between(&self, from: usize, to: usize) -> Result<Prolongation> {
        if to >= self.n_levels() || from > to {
            return Err(Error::LevelOutOfRange {
                level: to.max(from),
                n_levels: self.n_levels(),
            });
        }
        let mut p = Prolongation {
            matrix: CsrMatrix::identity(self.meshes[from].n_vertices()),
        };
        for step in &self.prolongations[from..to] {
            p = p.then(step)?;
        }
        Ok(p)
    }

    /// Keeps only the first `n_levels` meshes.
    pub fn truncated(&self, n_levels: usize) -> Result<Self> {
        if n_levels == 0 || n_levels > self.n_levels() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate a {}-level hierarchy to {n_levels} levels",
                self.n_levels()
            )));
        }
        Ok(Self {
            meshes: self.meshes[..n_levels].to_vec(),
            prolongations: self.prolongations[..n_levels - 1].to_vec(),
            coarse_index: self.coarse_index.min(n_levels - 1),
            beta: self.beta,
        })
    }
}

pub fn build_hierarchy(coarse: Mesh, n_levels: usize) -> Result<MeshHierarchy> {
    build_hierarchy_with_cap(coarse, n_levels, DEFAULT_VERTEX_CAP)
}

/// As [`build_hierarchy`], refusing up front if the finest mesh would exceed
/// `vertex_cap` vertices.
pub fn build_hierarchy_with_cap(coarse: Mesh, n_levels: usize, vertex_cap: usize) -> Result<MeshHierarchy> {
    if n_levels == 0 {
        return Err(Error::InvalidArgument("a hierarchy needs at least one level".into()));
    }
    // V' = V + E, E' = 2E + 3T, T' = 4T
    let (mut v, mut e, mut t) = (
        coarse.n_vertices() as u128,
        coarse.edges().len() as u128,
        coarse.n_triangles() as u128,
    );
    for _ in 1..n_levels {
        v += e;
        e = 2 * e + 3 * t;
        t *= 4;
        if v > vertex_cap as u128 {
            return Err(Error::Sizing {
                projected: usize::try_from(v).unwrap_or(usize::MAX),
                cap: vertex_cap,
            });
        }
    }
    if v > vertex_cap as u128 {
        return Err(Error::Sizing {
            projected: v as usize,
            cap: vertex_cap,
        });
    }

    let mut coarse = coarse;
    coarse.level = 0;
    let mut meshes = vec![coarse];
    let mut prolongations = Vec::with_capacity(n_levels - 1);
    for _ in 1..n_levels {
        let (fine, p) = refine_regular(meshes.last().unwrap())?;
        meshes.push(fine);
        prolongations.push(p);
    }
    Ok(MeshHierarchy {
        meshes,
        prolongations,
        coarse_index: 0,
        beta: 2,
    })
}
