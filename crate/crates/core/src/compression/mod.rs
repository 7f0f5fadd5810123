//! Algebraic compression of an arbitrary matrix into a DH²-matrix.
//!
//! Both cluster bases are built bottom-up from SVDs of the farfield blocks
//! `G|_{t̂×𝓕_tc}`; non-leaf clusters only see the reduced rows `R_{t'c'}` of
//! their sons. The column basis is the row basis of the adjoint.

mod aca;
mod farfield;

pub use aca::{aca_approximate, aca_compress, AcaMatrix, LowRank};
pub use farfield::{farfield_sets, FarEntry, FarfieldSets, Side};

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocktree::BlockTree;
use crate::clustering::ClusterTree;
use crate::dh2core::{positions, ClusterBasis, DH2Matrix};
use crate::directions::DirectionHierarchy;
use crate::error::{Error, Result};
use crate::geometry::KernelMatrix;
use crate::linalg::{power_iteration_norm, svd, truncation_rank, CMatrix};
use farfield::restrict_columns;

/// Read access to sub-blocks of a matrix.
pub trait MatrixAccess: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn block(&self, rows: &[usize], cols: &[usize]) -> CMatrix;
}

impl MatrixAccess for CMatrix {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn block(&self, rows: &[usize], cols: &[usize]) -> CMatrix {
        self.select(rows, cols)
    }
}

impl MatrixAccess for KernelMatrix<'_> {
    fn nrows(&self) -> usize {
        self.dim()
    }
    fn ncols(&self) -> usize {
        self.dim()
    }
    fn block(&self, rows: &[usize], cols: &[usize]) -> CMatrix {
        KernelMatrix::block(self, rows, cols)
    }
}

/// The adjoint `Gᴴ` of a wrapped matrix.
pub struct Adjoint<'a, A: ?Sized>(pub &'a A);

impl<A: MatrixAccess + ?Sized> MatrixAccess for Adjoint<'_, A> {
    fn nrows(&self) -> usize {
        self.0.ncols()
    }
    fn ncols(&self) -> usize {
        self.0.nrows()
    }
    fn block(&self, rows: &[usize], cols: &[usize]) -> CMatrix {
        self.0.block(cols, rows).adjoint()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Every block has weight one, so `ε` is an absolute bound.
    None,
    /// Block `b` is weighted by `‖G|b‖₂`, so `ε` bounds the error relative to the block.
    #[default]
    BlockRelative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionConfig {
    pub eps: f64,
    pub zeta: f64,
    pub max_rank: usize,
    pub weighting: Weighting,
    /// Power iteration steps for the block norms.
    pub power_steps: usize,
    pub seed: u64,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            zeta: 0.3,
            max_rank: 512,
            weighting: Weighting::BlockRelative,
            power_steps: 10,
            seed: 0,
        }
    }
}

impl CompressionConfig {
    pub fn with_eps(eps: f64) -> Self {
        Self { eps, ..Self::default() }
    }

    pub fn validate(&self, tree: &ClusterTree) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidConfig(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::InvalidConfig(format!("zeta must lie in (0, 1), got {}", self.zeta)));
        }
        let sons = tree.max_sons() as f64;
        if self.zeta * self.zeta * sons >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "zeta {} too large for clusters with {sons} sons: need zeta^2 * sons < 1",
                self.zeta
            )));
        }
        if self.max_rank == 0 || self.power_steps == 0 {
            return Err(Error::InvalidConfig("max_rank and power_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Weights of the admissible blocks.
///
/// `omega[b]` is the estimated `‖G|b‖₂` (or 1), and `scale[b] = ζ^level(b) / omega[b]`
/// is the factor applied to the columns of `b` in the weighted matrix `G^ω`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockWeights {
    pub omega: BTreeMap<usize, f64>,
    pub scale: BTreeMap<usize, f64>,
}

pub fn block_weights<A: MatrixAccess + ?Sized>(
    g: &A,
    tree: &ClusterTree,
    bt: &BlockTree,
    cfg: &CompressionConfig,
) -> Result<BlockWeights> {
    let omega: Vec<(usize, f64)> = bt
        .admissible
        .par_iter()
        .map(|&b| {
            let w = match cfg.weighting {
                Weighting::None => 1.0,
                Weighting::BlockRelative => {
                    let blk = bt.block(b);
                    let m = g.block(&tree.cluster(blk.row).indices, &tree.cluster(blk.col).indices);
                    let w = power_iteration_norm(
                        |x| m.apply(x),
                        |y| m.apply_adjoint(y),
                        m.cols(),
                        cfg.power_steps,
                        cfg.seed ^ b as u64,
                    )?;
                    if w > 0.0 {
                        w
                    } else {
                        1.0
                    }
                }
            };
            Ok((b, w))
        })
        .collect::<Result<_>>()?;
    let omega: BTreeMap<usize, f64> = omega.into_iter().collect();
    let scale = omega
        .iter()
        .map(|(&b, &w)| (b, cfg.zeta.powi(bt.block(b).level as i32) / w))
        .collect();
    Ok(BlockWeights { omega, scale })
}

/// Per-side bookkeeping of a basis construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisReport {
    pub side: Side,
    pub eps_hat: f64,
    /// Truncation tolerance `ε_r` for clusters of each level.
    pub tolerances: Vec<f64>,
    /// Realized `ε_r` per `(r, c)`: the first discarded singular value.
    pub realized: Vec<BTreeMap<usize, f64>>,
    /// Number of truncations where `max_rank` bound.
    pub capped: usize,
    /// `Σ_c #𝓕_tc` per cluster.
    pub farfield_sizes: Vec<usize>,
}

pub struct BasisResult {
    pub basis: ClusterBasis,
    pub report: BasisReport,
    /// Reduced rows `R_tc`, kept only on request.
    pub reduced: Option<Vec<BTreeMap<usize, CMatrix>>>,
}

/// `Σ_{r ∈ desc(t)} ζ^{2(level(r) − level(t))}` for every cluster.
pub fn descendant_sums(tree: &ClusterTree, zeta: f64) -> Vec<f64> {
    let mut s = vec![1.0; tree.len()];
    for t in (0..tree.len()).rev() {
        let sons: f64 = tree.cluster(t).sons.iter().map(|&x| s[x]).sum();
        s[t] = 1.0 + zeta * zeta * sons;
    }
    s
}

/// Per-level truncation tolerances `ε_r = ε̂ ζ^level(r)` for one side, with `ε̂`
/// chosen so that every block gets at most `eps_side` relative to its weight.
pub fn side_tolerances(tree: &ClusterTree, far: &FarfieldSets, bt: &BlockTree, zeta: f64, eps_side: f64) -> (f64, Vec<f64>) {
    let sums = descendant_sums(tree, zeta);
    let mut worst: f64 = 1.0;
    for &b in &bt.admissible {
        let blk = bt.block(b);
        let t = match far.side {
            Side::Row => blk.row,
            Side::Col => blk.col,
        };
        worst = worst.max(sums[t]);
    }
    let eps_hat = eps_side / worst.sqrt();
    let tol = (0..tree.depth + 1).map(|l| eps_hat * zeta.powi(l as i32)).collect();
    (eps_hat, tol)
}

/// The weighted farfield matrix `G^ω|_{t̂×𝓕_tc}`.
pub fn weighted_farfield_block<A: MatrixAccess + ?Sized>(
    g: &A,
    tree: &ClusterTree,
    far: &FarfieldSets,
    weights: &BlockWeights,
    t: usize,
    c: usize,
) -> CMatrix {
    let cols = far.indices(tree, t, c);
    let mut x = g.block(&tree.cluster(t).indices, &cols);
    let scales: Vec<f64> = far
        .get(t, c)
        .iter()
        .flat_map(|e| std::iter::repeat_n(weights.scale[&e.block], tree.cluster(e.cluster).size()))
        .collect();
    x.scale_cols(&scales);
    x
}

struct Truncated {
    q: CMatrix,
    r: CMatrix,
    realized: f64,
    capped: bool,
}

fn truncate(x: &CMatrix, tol: f64, max_rank: usize) -> Result<Truncated> {
    if x.is_empty() {
        return Ok(Truncated {
            q: CMatrix::zeros(x.rows(), 0),
            r: CMatrix::zeros(0, x.cols()),
            realized: 0.0,
            capped: false,
        });
    }
    let d = svd(x)?;
    let k = truncation_rank(&d.sigma, tol, max_rank);
    let capped = truncation_rank(&d.sigma, tol, usize::MAX) > k;
    let q = d.u.leading_cols(k);
    let mut v = d.v.leading_cols(k);
    v.scale_cols(&d.sigma[..k]);
    Ok(Truncated {
        q,
        r: v.adjoint(),
        realized: d.sigma.get(k).copied().unwrap_or(0.0),
        capped,
    })
}

#[derive(Default)]
struct Parts {
    leaf: Vec<(usize, usize, CMatrix)>,
    transfer: Vec<(usize, usize, CMatrix)>,
    ranks: Vec<(usize, usize, usize)>,
    realized: Vec<(usize, usize, f64)>,
    reduced: Vec<(usize, usize, CMatrix)>,
    capped: usize,
}

impl Parts {
    fn append(&mut self, mut o: Parts) {
        self.leaf.append(&mut o.leaf);
        self.transfer.append(&mut o.transfer);
        self.ranks.append(&mut o.ranks);
        self.realized.append(&mut o.realized);
        self.reduced.append(&mut o.reduced);
        self.capped += o.capped;
    }
}

struct Ctx<'a, A: ?Sized> {
    g: &'a A,
    tree: &'a ClusterTree,
    dirs: &'a DirectionHierarchy,
    far: &'a FarfieldSets,
    weights: &'a BlockWeights,
    tol: &'a [f64],
    max_rank: usize,
    keep: bool,
}

fn build_node<A: MatrixAccess + ?Sized>(ctx: &Ctx<'_, A>, t: usize) -> Result<(BTreeMap<usize, CMatrix>, Parts)> {
    let cl = ctx.tree.cluster(t);
    let sons: Vec<(BTreeMap<usize, CMatrix>, Parts)> =
        cl.sons.par_iter().map(|&s| build_node(ctx, s)).collect::<Result<_>>()?;
    let mut parts = Parts::default();
    let mut reduced = BTreeMap::new();
    let tol = ctx.tol[cl.level];
    for (&c, list) in &ctx.far.sets[t] {
        let tr = if cl.is_leaf() {
            let x = weighted_farfield_block(ctx.g, ctx.tree, ctx.far, ctx.weights, t, c);
            let tr = truncate(&x, tol, ctx.max_rank)?;
            parts.leaf.push((t, c, tr.q.clone()));
            tr
        } else {
            let sc = ctx.dirs.son(cl.level, c);
            let pieces: Vec<CMatrix> = cl
                .sons
                .iter()
                .zip(&sons)
                .map(|(&s, (r, _))| {
                    let cols = restrict_columns(ctx.tree, ctx.far.get(s, sc), list);
                    r[&sc].select_cols(&cols)
                })
                .collect();
            let refs: Vec<&CMatrix> = pieces.iter().collect();
            let tr = truncate(&CMatrix::vstack(&refs), tol, ctx.max_rank)?;
            let mut offset = 0;
            for (&s, p) in cl.sons.iter().zip(&pieces) {
                parts.transfer.push((s, c, tr.q.row_range(offset, p.rows())));
                offset += p.rows();
            }
            tr
        };
        if tr.capped {
            parts.capped += 1;
        }
        parts.ranks.push((t, c, tr.q.cols()));
        parts.realized.push((t, c, tr.realized));
        if ctx.keep {
            parts.reduced.push((t, c, tr.r.clone()));
        }
        reduced.insert(c, tr.r);
    }
    for (_, p) in sons {
        parts.append(p);
    }
    Ok((reduced, parts))
}

/// Builds the orthogonal directional basis for the rows of `g` (use [`Adjoint`]
/// and a column-side farfield for the column basis).
#[allow(clippy::too_many_arguments)]
pub fn build_basis<A: MatrixAccess + ?Sized>(
    g: &A,
    tree: &ClusterTree,
    dirs: &DirectionHierarchy,
    bt: &BlockTree,
    far: &FarfieldSets,
    weights: &BlockWeights,
    cfg: &CompressionConfig,
    keep_reduced: bool,
) -> Result<BasisResult> {
    cfg.validate(tree)?;
    let (eps_hat, tol) = side_tolerances(tree, far, bt, cfg.zeta, cfg.eps / std::f64::consts::SQRT_2);
    let ctx = Ctx {
        g,
        tree,
        dirs,
        far,
        weights,
        tol: &tol,
        max_rank: cfg.max_rank,
        keep: keep_reduced,
    };
    let (_, parts) = build_node(&ctx, 0)?;
    let n = tree.len();
    let mut basis = ClusterBasis::empty(n);
    let mut realized = vec![BTreeMap::new(); n];
    for (t, c, k) in parts.ranks {
        basis.ranks[t].insert(c, k);
    }
    for (t, c, q) in parts.leaf {
        basis.leaf[t].insert(c, q);
    }
    for (t, c, e) in parts.transfer {
        basis.transfer[t].insert(c, e);
    }
    for (t, c, e) in parts.realized {
        realized[t].insert(c, e);
    }
    let reduced = keep_reduced.then(|| {
        let mut r = vec![BTreeMap::new(); n];
        for (t, c, m) in parts.reduced {
            r[t].insert(c, m);
        }
        r
    });
    if parts.capped > 0 {
        log::warn!(
            "{:?} basis: rank cap {} bound in {} truncations, accuracy target not guaranteed",
            far.side,
            cfg.max_rank,
            parts.capped
        );
    }
    Ok(BasisResult {
        basis,
        report: BasisReport {
            side: far.side,
            eps_hat,
            tolerances: tol,
            realized,
            capped: parts.capped,
            farfield_sizes: far.total_sizes(tree),
        },
        reduced,
    })
}

/// `V_tcᴴ X` for a matrix `X` whose rows are ordered like the indices of `t`.
pub fn project_onto_basis(
    basis: &ClusterBasis,
    tree: &ClusterTree,
    dirs: &DirectionHierarchy,
    t: usize,
    c: usize,
    x: &CMatrix,
) -> CMatrix {
    let cl = tree.cluster(t);
    if cl.is_leaf() {
        return basis.leaf[t][&c].adjoint_mul(x);
    }
    let sc = dirs.son(cl.level, c);
    let all: Vec<usize> = (0..x.cols()).collect();
    let mut out = CMatrix::zeros(basis.ranks[t][&c], x.cols());
    for &s in &cl.sons {
        let rows = positions(&cl.indices, &tree.cluster(s).indices);
        let ys = project_onto_basis(basis, tree, dirs, s, sc, &x.select(&rows, &all));
        out.add_assign(&basis.transfer[s][&c].adjoint_mul(&ys));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub weights: BlockWeights,
    pub row: BasisReport,
    pub col: BasisReport,
    /// Wall-clock seconds.
    pub t_row: f64,
    pub t_col: f64,
    pub t_prj: f64,
}

/// Compresses `g` into a DH²-matrix on the given trees.
pub fn compress<A: MatrixAccess + ?Sized>(
    g: &A,
    tree: &ClusterTree,
    dirs: &DirectionHierarchy,
    bt: &BlockTree,
    cfg: &CompressionConfig,
) -> Result<(DH2Matrix, CompressionReport)> {
    cfg.validate(tree)?;
    let n = tree.num_indices;
    for found in [g.nrows(), g.ncols()] {
        if found != n {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
    }
    let start = Instant::now();
    let weights = block_weights(g, tree, bt, cfg)?;
    let t_weights = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let far_row = farfield_sets(tree, dirs, bt, Side::Row);
    let row = build_basis(g, tree, dirs, bt, &far_row, &weights, cfg, false)?;
    drop(far_row);
    let t_row = start.elapsed().as_secs_f64() + t_weights / 2.0;

    let start = Instant::now();
    let far_col = farfield_sets(tree, dirs, bt, Side::Col);
    let col = build_basis(&Adjoint(g), tree, dirs, bt, &far_col, &weights, cfg, false)?;
    drop(far_col);
    let t_col = start.elapsed().as_secs_f64() + t_weights / 2.0;

    let start = Instant::now();
    let coupling: Vec<(usize, CMatrix)> = bt
        .admissible
        .par_iter()
        .map(|&b| {
            let blk = bt.block(b);
            let c = blk.direction.expect("admissible block has a direction");
            let x = g.block(&tree.cluster(blk.row).indices, &tree.cluster(blk.col).indices);
            let y = project_onto_basis(&row.basis, tree, dirs, blk.row, c, &x);
            let z = project_onto_basis(&col.basis, tree, dirs, blk.col, c, &y.adjoint());
            (b, z.adjoint())
        })
        .collect();
    let nearfield: Vec<(usize, CMatrix)> = bt
        .inadmissible
        .par_iter()
        .map(|&b| {
            let blk = bt.block(b);
            (b, g.block(&tree.cluster(blk.row).indices, &tree.cluster(blk.col).indices))
        })
        .collect();
    let t_prj = start.elapsed().as_secs_f64();

    let a = DH2Matrix::new(
        tree.clone(),
        dirs.clone(),
        bt.clone(),
        row.basis,
        col.basis,
        coupling.into_iter().collect(),
        nearfield.into_iter().collect(),
    )?;
    Ok((
        a,
        CompressionReport {
            weights,
            row: row.report,
            col: col.report,
            t_row,
            t_col,
            t_prj,
        },
    ))
}
