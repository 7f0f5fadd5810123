//! Sphere meshes, Helmholtz kernels and the dense reference matrix.
//!
//! The mesh is the octahedron `|x1| + |x2| + |x3| = 1`, refined by 4-way midpoint
//! subdivision and then pushed radially onto the unit sphere. Each triangle
//! carries one piecewise-constant basis function; integrals are approximated
//! with a single midpoint rule, so entry `(i, j)` of the dense matrix is
//! `g(m_i, m_j) a_i a_j`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix};

pub type Point3 = [f64; 3];

/// Largest refinement level accepted by [`build_sphere_mesh`].
pub const MAX_MESH_LEVEL: usize = 8;

#[inline]
pub fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Point3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn cross(a: &Point3, b: &Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn scale(a: &Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Triangulated unit sphere with per-triangle geometric data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
    pub midpoints: Vec<Point3>,
    pub areas: Vec<f64>,
    pub normals: Vec<Point3>,
    /// Radius of the smallest ball around the midpoint containing the triangle.
    pub radii: Vec<f64>,
}

impl SurfaceMesh {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| {
                (0..3).map(move |k| {
                    norm(&sub(&self.vertices[t[k]], &self.vertices[t[(k + 1) % 3]]))
                })
            })
            .fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Writes an OFF file: header, vertex and triangle counts, coordinates and
    /// index triples.
    pub fn write_off<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "OFF")?;
        writeln!(w, "{} {} 0", self.vertices.len(), self.triangles.len())?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
        }
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Builds the refined octahedral sphere mesh with `8 * 4^level` triangles.
///
/// Faces are refined depth-first; the children of a triangle `(a, b, c)` are
/// emitted in the order corner `a`, corner `b`, corner `c`, center.
pub fn build_sphere_mesh(level: usize) -> Result<SurfaceMesh> {
    if level > MAX_MESH_LEVEL {
        return Err(Error::InvalidConfig(format!(
            "mesh level {level} exceeds the maximum {MAX_MESH_LEVEL}"
        )));
    }
    let mut vertices: Vec<Point3> = vec![
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    let faces = [
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    let mut midpoint_cache: HashMap<(usize, usize), usize> = HashMap::new();
    let mut triangles = Vec::with_capacity(8 << (2 * level));
    for f in faces {
        refine(f, level, &mut vertices, &mut midpoint_cache, &mut triangles);
    }
    for v in &mut vertices {
        let n = norm(v);
        *v = scale(v, 1.0 / n);
    }

    let n = triangles.len();
    let mut midpoints = Vec::with_capacity(n);
    let mut areas = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut radii = Vec::with_capacity(n);
    for t in &triangles {
        let [a, b, c] = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
        let m = scale(&[a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]], 1.0 / 3.0);
        let cr = cross(&sub(&b, &a), &sub(&c, &a));
        let len = norm(&cr);
        let mut nrm = scale(&cr, 1.0 / len);
        if dot(&nrm, &m) < 0.0 {
            nrm = scale(&nrm, -1.0);
        }
        let r = [a, b, c]
            .iter()
            .map(|p| norm(&sub(p, &m)))
            .fold(0.0, f64::max);
        midpoints.push(m);
        areas.push(0.5 * len);
        normals.push(nrm);
        radii.push(r);
    }
    Ok(SurfaceMesh {
        vertices,
        triangles,
        midpoints,
        areas,
        normals,
        radii,
    })
}

fn refine(
    t: [usize; 3],
    depth: usize,
    vertices: &mut Vec<Point3>,
    cache: &mut HashMap<(usize, usize), usize>,
    out: &mut Vec<[usize; 3]>,
) {
    if depth == 0 {
        out.push(t);
        return;
    }
    let mut mid = |i: usize, j: usize| -> usize {
        let key = (i.min(j), i.max(j));
        *cache.entry(key).or_insert_with(|| {
            let (a, b) = (vertices[i], vertices[j]);
            vertices.push([(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]);
            vertices.len() - 1
        })
    };
    let [a, b, c] = t;
    let ab = mid(a, b);
    let bc = mid(b, c);
    let ca = mid(c, a);
    for child in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]] {
        refine(child, depth - 1, vertices, cache, out);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// Single layer potential.
    Slp,
    /// Double layer potential combined with half the mass matrix.
    Dlp,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slp" => Ok(KernelKind::Slp),
            "dlp" => Ok(KernelKind::Dlp),
            other => Err(Error::InvalidConfig(format!("unknown kernel '{other}'"))),
        }
    }
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelKind::Slp => "slp",
            KernelKind::Dlp => "dlp",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub wave_number: f64,
}

impl KernelSpec {
    pub fn slp(wave_number: f64) -> Self {
        Self {
            kind: KernelKind::Slp,
            wave_number,
        }
    }

    pub fn dlp(wave_number: f64) -> Self {
        Self {
            kind: KernelKind::Dlp,
            wave_number,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.wave_number.is_finite() || self.wave_number < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "wave number must be finite and non-negative, got {}",
                self.wave_number
            )));
        }
        Ok(())
    }
}

/// Helmholtz kernel `exp(iκr) / (4πr)` or its normal derivative with respect to `y`.
pub fn kernel_value(spec: &KernelSpec, x: &Point3, y: &Point3, normal_y: &Point3) -> Result<c64> {
    let d = sub(x, y);
    let r = norm(&d);
    if r == 0.0 {
        return Err(Error::Domain("kernel evaluated at coincident points".into()));
    }
    Ok(kernel_at(spec, &d, r, normal_y))
}

#[inline]
fn kernel_at(spec: &KernelSpec, d: &Point3, r: f64, normal_y: &Point3) -> c64 {
    let kappa = spec.wave_number;
    let wave = c64::from_polar(1.0, kappa * r);
    match spec.kind {
        KernelKind::Slp => wave / (4.0 * PI * r),
        KernelKind::Dlp => {
            c64::new(1.0, -kappa * r) * wave * (dot(d, normal_y) / (4.0 * PI * r * r * r))
        }
    }
}

/// Directional part `g_c(x, y) = exp(iκ(‖x−y‖ − ⟨x−y, c⟩)) / (4π‖x−y‖)` of the
/// single layer kernel. Only the wave number of `spec` is used.
pub fn directional_kernel_value(spec: &KernelSpec, c: &Point3, x: &Point3, y: &Point3) -> Result<c64> {
    let d = sub(x, y);
    let r = norm(&d);
    if r == 0.0 {
        return Err(Error::Domain("kernel evaluated at coincident points".into()));
    }
    Ok(directional_at(spec.wave_number, c, &d, r))
}

#[inline]
pub(crate) fn directional_at(kappa: f64, c: &Point3, d: &Point3, r: f64) -> c64 {
    c64::from_polar(1.0 / (4.0 * PI * r), kappa * (r - dot(d, c)))
}

/// Lazily evaluated Galerkin surrogate matrix for a mesh and kernel.
#[derive(Clone, Copy, Debug)]
pub struct KernelMatrix<'a> {
    pub mesh: &'a SurfaceMesh,
    pub spec: KernelSpec,
}

impl<'a> KernelMatrix<'a> {
    pub fn new(mesh: &'a SurfaceMesh, spec: KernelSpec) -> Self {
        Self { mesh, spec }
    }

    pub fn dim(&self) -> usize {
        self.mesh.len()
    }

    /// Entry `(i, j)` of the surrogate matrix.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> c64 {
        let m = self.mesh;
        if i == j {
            let a = m.areas[i];
            return match self.spec.kind {
                KernelKind::Slp => c64::new(a.powf(1.5) / (2.0 * PI.sqrt()), 0.0),
                KernelKind::Dlp => c64::new(0.5 * a, 0.0),
            };
        }
        let d = sub(&m.midpoints[i], &m.midpoints[j]);
        let r = norm(&d);
        kernel_at(&self.spec, &d, r, &m.normals[j]) * (m.areas[i] * m.areas[j])
    }

    pub fn block(&self, rows: &[usize], cols: &[usize]) -> CMatrix {
        CMatrix::from_fn(rows.len(), cols.len(), |i, j| self.entry(rows[i], cols[j]))
    }
}

/// Assembles the full `n × n` surrogate matrix.
///
/// Off-diagonal entries are `g(m_i, m_j) a_i a_j`. The single layer diagonal is
/// `a_i^{3/2} / (2√π)`; the combined double layer operator `½M + G_dlp` has
/// `½ a_i` on its diagonal.
pub fn assemble_dense_matrix(mesh: &SurfaceMesh, spec: &KernelSpec) -> Result<CMatrix> {
    spec.validate()?;
    let n = mesh.len();
    let km = KernelMatrix::new(mesh, *spec);
    let mut data = vec![c64::new(0.0, 0.0); n * n];
    data.par_chunks_mut(n.max(1)).enumerate().for_each(|(j, col)| {
        for (i, z) in col.iter_mut().enumerate() {
            *z = km.entry(i, j);
        }
    });
    Ok(CMatrix::from_col_major(n, n, data).expect("n * n entries"))
}
