//! Direct construction of a DH²-matrix by directional tensor Chebyshev
//! interpolation of the kernel.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::blocktree::{used_directions, BlockTree};
use crate::clustering::{BoundingBox, ClusterTree};
use crate::dh2core::{ClusterBasis, DH2Matrix};
use crate::directions::DirectionHierarchy;
use crate::error::{Error, Result};
use crate::geometry::{directional_at, dot, norm, sub, KernelKind, KernelMatrix, KernelSpec, Point3, SurfaceMesh};
use crate::linalg::{c64, CMatrix};

/// Tensor Chebyshev interpolation of order `m` per coordinate (`m^3` points per box).
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationScheme {
    order: usize,
    nodes: Vec<f64>,
}

impl InterpolationScheme {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig("interpolation order must be positive".into()));
        }
        let m = order as f64;
        let nodes = (0..order)
            .map(|i| (std::f64::consts::PI * (2 * i + 1) as f64 / (2.0 * m)).cos())
            .collect();
        Ok(Self { order, nodes })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of tensor points, `m^3`.
    pub fn rank(&self) -> usize {
        self.order.pow(3)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Tensor points of the box, index `i0 + m*i1 + m^2*i2`.
    pub fn points(&self, b: &BoundingBox) -> Vec<Point3> {
        let (mid, half) = affine(b);
        let m = self.order;
        (0..self.rank())
            .map(|nu| {
                let idx = [nu % m, (nu / m) % m, nu / (m * m)];
                [
                    mid[0] + half[0] * self.nodes[idx[0]],
                    mid[1] + half[1] * self.nodes[idx[1]],
                    mid[2] + half[2] * self.nodes[idx[2]],
                ]
            })
            .collect()
    }

    /// Values and reference-coordinate derivatives of the 1D Lagrange polynomials at `s`.
    fn lagrange_1d(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let x = &self.nodes;
        let m = self.order;
        let mut val = vec![0.0; m];
        let mut der = vec![0.0; m];
        for i in 0..m {
            let mut p = 1.0;
            for j in 0..m {
                if j != i {
                    p *= (s - x[j]) / (x[i] - x[j]);
                }
            }
            val[i] = p;
            let mut d = 0.0;
            for k in 0..m {
                if k == i {
                    continue;
                }
                let mut q = 1.0 / (x[i] - x[k]);
                for j in 0..m {
                    if j != i && j != k {
                        q *= (s - x[j]) / (x[i] - x[j]);
                    }
                }
                d += q;
            }
            der[i] = d;
        }
        (val, der)
    }

    /// All `m^3` Lagrange polynomials of the box evaluated at `p`.
    pub fn lagrange(&self, b: &BoundingBox, p: &Point3) -> Vec<f64> {
        let (mid, half) = affine(b);
        let l: Vec<Vec<f64>> = (0..3).map(|k| self.lagrange_1d((p[k] - mid[k]) / half[k]).0).collect();
        let m = self.order;
        (0..self.rank())
            .map(|nu| l[0][nu % m] * l[1][(nu / m) % m] * l[2][nu / (m * m)])
            .collect()
    }

    /// Gradients of all `m^3` Lagrange polynomials of the box at `p`.
    pub fn lagrange_gradient(&self, b: &BoundingBox, p: &Point3) -> Vec<Point3> {
        let (mid, half) = affine(b);
        let ld: Vec<(Vec<f64>, Vec<f64>)> = (0..3).map(|k| self.lagrange_1d((p[k] - mid[k]) / half[k])).collect();
        let m = self.order;
        (0..self.rank())
            .map(|nu| {
                let i = [nu % m, (nu / m) % m, nu / (m * m)];
                let v = |k: usize| ld[k].0[i[k]];
                let d = |k: usize| ld[k].1[i[k]] / half[k];
                [d(0) * v(1) * v(2), v(0) * d(1) * v(2), v(0) * v(1) * d(2)]
            })
            .collect()
    }
}

fn affine(b: &BoundingBox) -> (Point3, Point3) {
    let mid = b.center();
    let e = b.extent();
    let half = e.map(|v| if v > 0.0 { 0.5 * v } else { 1.0 });
    (mid, half)
}

/// Builds the DH²-matrix of the surrogate Galerkin matrix by interpolation on
/// every admissible block and exact evaluation on the nearfield.
pub fn assemble_dh2_by_interpolation(
    mesh: &SurfaceMesh,
    spec: &KernelSpec,
    tree: &ClusterTree,
    dirs: &DirectionHierarchy,
    bt: &BlockTree,
    order: usize,
) -> Result<DH2Matrix> {
    spec.validate()?;
    if tree.num_indices != mesh.len() {
        return Err(Error::DimensionMismatch {
            expected: mesh.len(),
            found: tree.num_indices,
        });
    }
    let scheme = InterpolationScheme::new(order)?;
    let kappa = spec.wave_number;
    let used = used_directions(tree, dirs, bt);
    let points: Vec<Vec<Point3>> = tree.clusters.iter().map(|c| scheme.points(&c.bbox)).collect();

    let row = build_basis(mesh, tree, dirs, &scheme, &points, &used.row, kappa, false);
    let col = build_basis(mesh, tree, dirs, &scheme, &points, &used.col, kappa, spec.kind == KernelKind::Dlp);

    let coupling: Vec<(usize, CMatrix)> = bt
        .admissible
        .par_iter()
        .map(|&b| {
            let blk = bt.block(b);
            let c = dirs.direction(blk.level, blk.direction.expect("admissible"));
            let (pt, ps) = (&points[blk.row], &points[blk.col]);
            let mut coincident = false;
            let s = CMatrix::from_fn(pt.len(), ps.len(), |i, j| {
                let d = sub(&pt[i], &ps[j]);
                let r = norm(&d);
                coincident |= r == 0.0;
                directional_at(kappa, &c, &d, r)
            });
            if coincident {
                Err(Error::Domain(format!("admissible block {b} has coincident interpolation points")))
            } else {
                Ok((b, s))
            }
        })
        .collect::<Result<_>>()?;

    let km = KernelMatrix::new(mesh, *spec);
    let nearfield: BTreeMap<usize, CMatrix> = bt
        .inadmissible
        .par_iter()
        .map(|&b| {
            let blk = bt.block(b);
            (b, km.block(&tree.cluster(blk.row).indices, &tree.cluster(blk.col).indices))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();

    DH2Matrix::new(
        tree.clone(),
        dirs.clone(),
        bt.clone(),
        row,
        col,
        coupling.into_iter().collect(),
        nearfield,
    )
}

/// Leaf matrices `exp(iκ⟨m_i,c⟩) ℓ_ν(m_i) a_i` and transfer matrices
/// `exp(iκ⟨ξ',c−c'⟩) ℓ_ν(ξ')`. With `normal_derivative` the leaf entries are the
/// conjugated normal derivatives of `exp(−iκ⟨y,c⟩) ℓ_ν(y)` times `a_j`.
#[allow(clippy::too_many_arguments)]
fn build_basis(
    mesh: &SurfaceMesh,
    tree: &ClusterTree,
    dirs: &DirectionHierarchy,
    scheme: &InterpolationScheme,
    points: &[Vec<Point3>],
    used: &[std::collections::BTreeSet<usize>],
    kappa: f64,
    normal_derivative: bool,
) -> ClusterBasis {
    let k = scheme.rank();
    let mut basis = ClusterBasis::empty(tree.len());
    for cl in &tree.clusters {
        for &c in &used[cl.id] {
            basis.ranks[cl.id].insert(c, k);
        }
    }
    let leaves: Vec<(usize, BTreeMap<usize, CMatrix>)> = tree
        .clusters
        .par_iter()
        .filter(|cl| cl.is_leaf())
        .map(|cl| {
            let mut out = BTreeMap::new();
            for &ci in &used[cl.id] {
                let c = dirs.direction(cl.level, ci);
                let mut v = CMatrix::zeros(cl.size(), k);
                for (r, &i) in cl.indices.iter().enumerate() {
                    let x = &mesh.midpoints[i];
                    let a = mesh.areas[i];
                    let phase = c64::from_polar(1.0, kappa * dot(x, &c));
                    if normal_derivative {
                        let n = &mesh.normals[i];
                        let l = scheme.lagrange(&cl.bbox, x);
                        let g = scheme.lagrange_gradient(&cl.bbox, x);
                        let cn = dot(&c, n);
                        for nu in 0..k {
                            // conj(exp(-iκ⟨y,c⟩)(∇ℓ·n − iκ⟨c,n⟩ℓ))
                            let inner = c64::new(dot(&g[nu], n), kappa * cn * l[nu]);
                            v[(r, nu)] = phase * inner * a;
                        }
                    } else {
                        let l = scheme.lagrange(&cl.bbox, x);
                        for nu in 0..k {
                            v[(r, nu)] = phase * (l[nu] * a);
                        }
                    }
                }
                out.insert(ci, v);
            }
            (cl.id, out)
        })
        .collect();
    for (t, m) in leaves {
        basis.leaf[t] = m;
    }

    for cl in &tree.clusters {
        if let Some(p) = cl.parent {
            let father = tree.cluster(p);
            if used[p].is_empty() {
                continue;
            }
            let xi = &points[cl.id];
            let l: Vec<Vec<f64>> = xi.iter().map(|x| scheme.lagrange(&father.bbox, x)).collect();
            for &ci in &used[p] {
                let c = dirs.direction(father.level, ci);
                let cs = dirs.direction(cl.level, dirs.son(father.level, ci));
                let dc = sub(&c, &cs);
                let e = CMatrix::from_fn(k, k, |nu_s, nu| c64::from_polar(l[nu_s][nu], kappa * dot(&xi[nu_s], &dc)));
                basis.transfer[cl.id].insert(ci, e);
            }
        }
    }
    basis
}
