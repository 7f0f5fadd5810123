//! Directional H²-matrices: nested directional cluster bases, coupling and
//! nearfield blocks, the fast matrix-vector product and storage accounting.

mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::blocktree::{used_directions, BlockStatus, BlockTree};
use crate::clustering::ClusterTree;
use crate::directions::DirectionHierarchy;
use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, ZERO};

pub use io::{load_dh2, save_dh2, DH2_FORMAT};

/// Default dimension limit for [`DH2Matrix::expand_dense`].
pub const DEFAULT_EXPAND_CAP: usize = 4096;

/// Nested directional cluster basis.
///
/// `ranks[t]` lists every direction stored for cluster `t` (indices into the
/// direction set of its level) with its rank. Leaves keep `leaf[t][c]` with
/// `#t × k_tc` entries; every non-root cluster `t'` keeps `transfer[t'][c]`
/// with `k_{t',sd(c)} × k_{t,c}` entries, keyed by the father's direction `c`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterBasis {
    pub ranks: Vec<BTreeMap<usize, usize>>,
    #[serde(skip)]
    pub leaf: Vec<BTreeMap<usize, CMatrix>>,
    #[serde(skip)]
    pub transfer: Vec<BTreeMap<usize, CMatrix>>,
}

impl ClusterBasis {
    pub fn empty(clusters: usize) -> Self {
        Self {
            ranks: vec![BTreeMap::new(); clusters],
            leaf: vec![BTreeMap::new(); clusters],
            transfer: vec![BTreeMap::new(); clusters],
        }
    }

    pub fn rank(&self, t: usize, c: usize) -> Option<usize> {
        self.ranks[t].get(&c).copied()
    }

    pub fn max_rank(&self) -> usize {
        self.ranks.iter().flat_map(|m| m.values().copied()).max().unwrap_or(0)
    }

    pub fn leaf_entries(&self) -> usize {
        self.leaf.iter().flat_map(|m| m.values()).map(CMatrix::len).sum()
    }

    pub fn transfer_entries(&self) -> usize {
        self.transfer.iter().flat_map(|m| m.values()).map(CMatrix::len).sum()
    }

    pub fn matrix_count(&self) -> usize {
        self.leaf.iter().chain(&self.transfer).map(BTreeMap::len).sum()
    }

    /// Explicit basis matrices `V_tc` for all stored `(t, c)`, built bottom-up.
    pub fn expand(&self, tree: &ClusterTree, dirs: &DirectionHierarchy) -> Vec<BTreeMap<usize, CMatrix>> {
        let mut out: Vec<BTreeMap<usize, CMatrix>> = vec![BTreeMap::new(); tree.len()];
        for t in (0..tree.len()).rev() {
            let cl = tree.cluster(t);
            for (&c, &k) in &self.ranks[t] {
                let v = if cl.is_leaf() {
                    self.leaf[t][&c].clone()
                } else {
                    let mut v = CMatrix::zeros(cl.size(), k);
                    let sc = dirs.son(cl.level, c);
                    for &s in &cl.sons {
                        let part = out[s][&sc].mul(&self.transfer[s][&c]);
                        let pos = positions(&cl.indices, &tree.cluster(s).indices);
                        for j in 0..k {
                            let src = part.col(j);
                            let dst = v.col_mut(j);
                            for (r, &p) in pos.iter().enumerate() {
                                dst[p] = src[r];
                            }
                        }
                    }
                    v
                };
                out[t].insert(c, v);
            }
        }
        out
    }

    fn validate(&self, tree: &ClusterTree, dirs: &DirectionHierarchy, side: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::Format(format!("{side} basis: {msg}")));
        if self.ranks.len() != tree.len() || self.leaf.len() != tree.len() || self.transfer.len() != tree.len() {
            return bad("cluster count mismatch".into());
        }
        for cl in &tree.clusters {
            let t = cl.id;
            for (&c, &k) in &self.ranks[t] {
                if c >= dirs.count(cl.level) {
                    return bad(format!("direction {c} out of range for cluster {t}"));
                }
                if cl.is_leaf() {
                    match self.leaf[t].get(&c) {
                        Some(v) if v.shape() == (cl.size(), k) => {}
                        _ => return bad(format!("leaf matrix ({t},{c}) missing or misshaped")),
                    }
                } else {
                    let sc = dirs.son(cl.level, c);
                    for &s in &cl.sons {
                        let ks = self.rank(s, sc);
                        match (ks, self.transfer[s].get(&c)) {
                            (Some(ks), Some(e)) if e.shape() == (ks, k) => {}
                            _ => return bad(format!("transfer matrix ({s},{c}) missing or misshaped")),
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Positions of the sorted `sub` inside the sorted `all`.
pub(crate) fn positions(all: &[usize], sub: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sub.len());
    let mut p = 0;
    for &i in sub {
        while all[p] != i {
            p += 1;
        }
        out.push(p);
    }
    out
}

/// Number of stored complex entries per category.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StorageReport {
    pub leaf_basis: usize,
    pub transfer: usize,
    pub coupling: usize,
    pub nearfield: usize,
    pub total: usize,
    /// KiB per degree of freedom at 16 bytes per entry.
    pub mem_per_dof_kib: f64,
}

/// Number of matrix-vector products per stored matrix category during one matvec.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiplyCounts {
    pub leaf: usize,
    pub transfer: usize,
    pub coupling: usize,
    pub nearfield: usize,
}

impl MultiplyCounts {
    pub fn total(&self) -> usize {
        self.leaf + self.transfer + self.coupling + self.nearfield
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DH2Matrix {
    pub tree: ClusterTree,
    pub dirs: DirectionHierarchy,
    pub blocks: BlockTree,
    pub row_basis: ClusterBasis,
    pub col_basis: ClusterBasis,
    /// Coupling matrices keyed by admissible block id.
    pub coupling: BTreeMap<usize, CMatrix>,
    /// Dense blocks keyed by inadmissible block id.
    pub nearfield: BTreeMap<usize, CMatrix>,
}

impl DH2Matrix {
    /// Assembles the parts and checks that every dimension fits.
    pub fn new(
        tree: ClusterTree,
        dirs: DirectionHierarchy,
        blocks: BlockTree,
        row_basis: ClusterBasis,
        col_basis: ClusterBasis,
        coupling: BTreeMap<usize, CMatrix>,
        nearfield: BTreeMap<usize, CMatrix>,
    ) -> Result<Self> {
        let m = Self {
            tree,
            dirs,
            blocks,
            row_basis,
            col_basis,
            coupling,
            nearfield,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.tree.num_indices
    }

    pub fn validate(&self) -> Result<()> {
        self.row_basis.validate(&self.tree, &self.dirs, "row")?;
        self.col_basis.validate(&self.tree, &self.dirs, "column")?;
        if self.coupling.len() != self.blocks.admissible.len() || self.nearfield.len() != self.blocks.inadmissible.len() {
            return Err(Error::Format("block matrix count mismatch".into()));
        }
        for b in &self.blocks.blocks {
            let (t, s) = (self.tree.cluster(b.row), self.tree.cluster(b.col));
            match b.status {
                BlockStatus::Admissible => {
                    let c = b.direction.ok_or_else(|| Error::Format(format!("block {} lacks a direction", b.id)))?;
                    let kt = self.row_basis.rank(b.row, c);
                    let ks = self.col_basis.rank(b.col, c);
                    match (kt, ks, self.coupling.get(&b.id)) {
                        (Some(kt), Some(ks), Some(s)) if s.shape() == (kt, ks) => {}
                        _ => return Err(Error::Format(format!("coupling matrix of block {} missing or misshaped", b.id))),
                    }
                }
                BlockStatus::Inadmissible => match self.nearfield.get(&b.id) {
                    Some(n) if n.shape() == (t.size(), s.size()) => {}
                    _ => return Err(Error::Format(format!("nearfield block {} missing or misshaped", b.id))),
                },
                BlockStatus::Subdivided => {}
            }
        }
        Ok(())
    }

    pub fn max_rank(&self) -> usize {
        self.row_basis.max_rank().max(self.col_basis.max_rank())
    }

    pub fn storage_report(&self) -> StorageReport {
        let leaf_basis = self.row_basis.leaf_entries() + self.col_basis.leaf_entries();
        let transfer = self.row_basis.transfer_entries() + self.col_basis.transfer_entries();
        let coupling = self.coupling.values().map(CMatrix::len).sum();
        let nearfield = self.nearfield.values().map(CMatrix::len).sum();
        let total = leaf_basis + transfer + coupling + nearfield;
        StorageReport {
            leaf_basis,
            transfer,
            coupling,
            nearfield,
            total,
            mem_per_dof_kib: total as f64 * 16.0 / 1024.0 / self.dim().max(1) as f64,
        }
    }

    /// Number of stored matrices; a matvec multiplies with each exactly once.
    pub fn stored_matrix_count(&self) -> usize {
        self.row_basis.matrix_count() + self.col_basis.matrix_count() + self.coupling.len() + self.nearfield.len()
    }

    pub fn matvec(&self, x: &[c64]) -> Result<Vec<c64>> {
        self.apply(x, false, &mut MultiplyCounts::default())
    }

    pub fn matvec_adjoint(&self, x: &[c64]) -> Result<Vec<c64>> {
        self.apply(x, true, &mut MultiplyCounts::default())
    }

    /// Matvec that also reports how many products with stored matrices were formed.
    pub fn matvec_counted(&self, x: &[c64]) -> Result<(Vec<c64>, MultiplyCounts)> {
        let mut counts = MultiplyCounts::default();
        let y = self.apply(x, false, &mut counts)?;
        Ok((y, counts))
    }

    fn apply(&self, x: &[c64], adjoint: bool, counts: &mut MultiplyCounts) -> Result<Vec<c64>> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        let (src, dst) = if adjoint {
            (&self.row_basis, &self.col_basis)
        } else {
            (&self.col_basis, &self.row_basis)
        };
        let tree = &self.tree;
        let dirs = &self.dirs;

        let mut xh = self.forward(src, x, counts);

        let mut yh: Vec<BTreeMap<usize, Vec<c64>>> = dst
            .ranks
            .iter()
            .map(|m| m.iter().map(|(&c, &k)| (c, vec![ZERO; k])).collect())
            .collect();
        for (&b, s) in &self.coupling {
            let blk = self.blocks.block(b);
            let c = blk.direction.expect("admissible");
            let (t, from) = if adjoint { (blk.col, blk.row) } else { (blk.row, blk.col) };
            let xv = &xh[from][&c];
            let yv = yh[t].get_mut(&c).expect("coupling target direction");
            if adjoint {
                s.adjoint_gemv_acc(xv, yv);
            } else {
                s.gemv_acc(xv, yv);
            }
            counts.coupling += 1;
        }
        xh.clear();

        let mut y = vec![ZERO; n];
        for t in 0..tree.len() {
            let cl = tree.cluster(t);
            let coeffs = std::mem::take(&mut yh[t]);
            if cl.is_leaf() {
                let mut local = vec![ZERO; cl.size()];
                for (c, v) in &coeffs {
                    dst.leaf[t][c].gemv_acc(v, &mut local);
                    counts.leaf += 1;
                }
                for (&i, v) in cl.indices.iter().zip(local) {
                    y[i] += v;
                }
            } else {
                for (c, v) in &coeffs {
                    let sc = dirs.son(cl.level, *c);
                    for &s in &cl.sons {
                        let target = yh[s].get_mut(&sc).expect("son direction");
                        dst.transfer[s][c].gemv_acc(v, target);
                        counts.transfer += 1;
                    }
                }
            }
        }

        for (&b, m) in &self.nearfield {
            let blk = self.blocks.block(b);
            let (t, s) = if adjoint { (blk.col, blk.row) } else { (blk.row, blk.col) };
            let xs: Vec<c64> = tree.cluster(s).indices.iter().map(|&j| x[j]).collect();
            let ti = &tree.cluster(t).indices;
            let mut local = vec![ZERO; ti.len()];
            if adjoint {
                m.adjoint_gemv_acc(&xs, &mut local);
            } else {
                m.gemv_acc(&xs, &mut local);
            }
            counts.nearfield += 1;
            for (&i, v) in ti.iter().zip(local) {
                y[i] += v;
            }
        }
        Ok(y)
    }

    /// Coefficients `x̂_tc = V_tcᴴ x|t` for every stored `(t, c)` of `basis`.
    fn forward(&self, basis: &ClusterBasis, x: &[c64], counts: &mut MultiplyCounts) -> Vec<BTreeMap<usize, Vec<c64>>> {
        let tree = &self.tree;
        let mut xh: Vec<BTreeMap<usize, Vec<c64>>> = vec![BTreeMap::new(); tree.len()];
        for t in (0..tree.len()).rev() {
            let cl = tree.cluster(t);
            if basis.ranks[t].is_empty() {
                continue;
            }
            let mut out = BTreeMap::new();
            if cl.is_leaf() {
                let xt: Vec<c64> = cl.indices.iter().map(|&i| x[i]).collect();
                for (&c, &k) in &basis.ranks[t] {
                    let mut v = vec![ZERO; k];
                    basis.leaf[t][&c].adjoint_gemv_acc(&xt, &mut v);
                    counts.leaf += 1;
                    out.insert(c, v);
                }
            } else {
                for (&c, &k) in &basis.ranks[t] {
                    let sc = self.dirs.son(cl.level, c);
                    let mut v = vec![ZERO; k];
                    for &s in &cl.sons {
                        basis.transfer[s][&c].adjoint_gemv_acc(&xh[s][&sc], &mut v);
                        counts.transfer += 1;
                    }
                    out.insert(c, v);
                }
            }
            xh[t] = out;
        }
        xh
    }

    /// Dense matrix represented by `self`, for dimensions up to [`DEFAULT_EXPAND_CAP`].
    pub fn expand_dense(&self) -> Result<CMatrix> {
        self.expand_dense_capped(DEFAULT_EXPAND_CAP)
    }

    pub fn expand_dense_capped(&self, cap: usize) -> Result<CMatrix> {
        let n = self.dim();
        if n > cap {
            return Err(Error::CapExceeded { n, cap });
        }
        let v = self.row_basis.expand(&self.tree, &self.dirs);
        let w = self.col_basis.expand(&self.tree, &self.dirs);
        let mut g = CMatrix::zeros(n, n);
        let mut place = |rows: &[usize], cols: &[usize], m: &CMatrix| {
            for (jj, &j) in cols.iter().enumerate() {
                let src = m.col(jj);
                let dst = g.col_mut(j);
                for (ii, &i) in rows.iter().enumerate() {
                    dst[i] = src[ii];
                }
            }
        };
        for (&b, s) in &self.coupling {
            let blk = self.blocks.block(b);
            let c = blk.direction.expect("admissible");
            let m = v[blk.row][&c].mul(s).mul_adjoint(&w[blk.col][&c]);
            place(&self.tree.cluster(blk.row).indices, &self.tree.cluster(blk.col).indices, &m);
        }
        for (&b, m) in &self.nearfield {
            let blk = self.blocks.block(b);
            place(&self.tree.cluster(blk.row).indices, &self.tree.cluster(blk.col).indices, m);
        }
        Ok(g)
    }

    /// Directions that admissible blocks require on the row and column side.
    pub fn required_directions(&self) -> crate::blocktree::UsedDirections {
        used_directions(&self.tree, &self.dirs, &self.blocks)
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::linalg::testing::random_matrix;

    /// DH² matrix on the given skeleton with random bases of rank `k` and random blocks.
    pub fn random_dh2(tree: &ClusterTree, dirs: &DirectionHierarchy, bt: &BlockTree, k: usize, seed: u64) -> DH2Matrix {
        let used = used_directions(tree, dirs, bt);
        let mut seed = seed;
        let mut next = || {
            seed += 1;
            seed
        };
        let mut make = |sets: &[std::collections::BTreeSet<usize>]| {
            let mut basis = ClusterBasis::empty(tree.len());
            for cl in &tree.clusters {
                for &c in &sets[cl.id] {
                    let kk = k.min(cl.size());
                    basis.ranks[cl.id].insert(c, kk);
                }
            }
            for cl in &tree.clusters {
                for (&c, &kk) in &basis.ranks[cl.id].clone() {
                    if cl.is_leaf() {
                        basis.leaf[cl.id].insert(c, random_matrix(cl.size(), kk, next()));
                    } else {
                        let sc = dirs.son(cl.level, c);
                        for &s in &cl.sons {
                            let ks = basis.ranks[s][&sc];
                            basis.transfer[s].insert(c, random_matrix(ks, kk, next()));
                        }
                    }
                }
            }
            basis
        };
        let row = make(&used.row);
        let col = make(&used.col);
        let mut coupling = BTreeMap::new();
        for &b in &bt.admissible {
            let blk = bt.block(b);
            let c = blk.direction.unwrap();
            coupling.insert(b, random_matrix(row.ranks[blk.row][&c], col.ranks[blk.col][&c], next()));
        }
        let mut nearfield = BTreeMap::new();
        for &b in &bt.inadmissible {
            let blk = bt.block(b);
            nearfield.insert(b, random_matrix(tree.cluster(blk.row).size(), tree.cluster(blk.col).size(), next()));
        }
        DH2Matrix::new(tree.clone(), dirs.clone(), bt.clone(), row, col, coupling, nearfield).unwrap()
    }
}
