use std::collections::BTreeMap;

use rayon::prelude::*;

use super::MatrixAccess;
use crate::blocktree::BlockTree;
use crate::clustering::ClusterTree;
use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix};

/// Low-rank factorization `A Bᴴ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRank {
    pub a: CMatrix,
    pub b: CMatrix,
}

impl LowRank {
    pub fn rank(&self) -> usize {
        self.a.cols()
    }

    pub fn to_dense(&self) -> CMatrix {
        self.a.mul_adjoint(&self.b)
    }

    pub fn entries(&self) -> usize {
        self.a.len() + self.b.len()
    }
}

/// Cross approximation with full pivoting.
///
/// Each step takes the largest remaining entry as pivot and stops once its
/// magnitude falls to `tolerance` times the first pivot, or after `max_rank` steps.
pub fn aca_approximate(block: &CMatrix, tolerance: f64, max_rank: usize) -> LowRank {
    let (m, n) = block.shape();
    let mut res = block.clone();
    let mut us: Vec<Vec<c64>> = Vec::new();
    let mut vs: Vec<Vec<c64>> = Vec::new();
    let mut first = 0.0;
    while us.len() < max_rank.min(m).min(n) {
        let (mut pi, mut pj, mut best) = (0, 0, 0.0);
        for j in 0..n {
            for (i, z) in res.col(j).iter().enumerate() {
                let a = z.norm();
                if a > best {
                    (pi, pj, best) = (i, j, a);
                }
            }
        }
        if us.is_empty() {
            first = best;
        }
        if best == 0.0 || best <= tolerance * first {
            break;
        }
        let pivot = res[(pi, pj)];
        let u: Vec<c64> = res.col(pj).to_vec();
        let v: Vec<c64> = (0..n).map(|j| (res[(pi, j)] / pivot).conj()).collect();
        for (j, vj) in v.iter().enumerate() {
            let w = vj.conj();
            for (r, ui) in res.col_mut(j).iter_mut().zip(&u) {
                *r -= ui * w;
            }
        }
        us.push(u);
        vs.push(v);
    }
    let k = us.len();
    LowRank {
        a: CMatrix::from_col_major(m, k, us.concat()).expect("shape"),
        b: CMatrix::from_col_major(n, k, vs.concat()).expect("shape"),
    }
}

/// Hierarchical matrix with ACA factors on admissible blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct AcaMatrix {
    pub tree: ClusterTree,
    pub blocks: BlockTree,
    pub lowrank: BTreeMap<usize, LowRank>,
    pub nearfield: BTreeMap<usize, CMatrix>,
}

impl AcaMatrix {
    pub fn dim(&self) -> usize {
        self.tree.num_indices
    }

    pub fn max_rank(&self) -> usize {
        self.lowrank.values().map(LowRank::rank).max().unwrap_or(0)
    }

    pub fn storage_entries(&self) -> usize {
        self.lowrank.values().map(LowRank::entries).sum::<usize>()
            + self.nearfield.values().map(CMatrix::len).sum::<usize>()
    }

    pub fn mem_per_dof_kib(&self) -> f64 {
        self.storage_entries() as f64 * 16.0 / 1024.0 / self.dim().max(1) as f64
    }

    pub fn matvec(&self, x: &[c64]) -> Result<Vec<c64>> {
        self.apply(x, false)
    }

    pub fn matvec_adjoint(&self, x: &[c64]) -> Result<Vec<c64>> {
        self.apply(x, true)
    }

    fn apply(&self, x: &[c64], adjoint: bool) -> Result<Vec<c64>> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x.len() });
        }
        let mut y = vec![c64::new(0.0, 0.0); n];
        let mut run = |b: usize, f: &dyn Fn(&[c64]) -> Vec<c64>| {
            let blk = self.blocks.block(b);
            let (rows, cols) = (&self.tree.cluster(blk.row).indices, &self.tree.cluster(blk.col).indices);
            let (src, dst) = if adjoint { (rows, cols) } else { (cols, rows) };
            let xs: Vec<c64> = src.iter().map(|&i| x[i]).collect();
            for (&i, v) in dst.iter().zip(f(&xs)) {
                y[i] += v;
            }
        };
        for (&b, lr) in &self.lowrank {
            if adjoint {
                run(b, &|v| lr.b.apply(&lr.a.apply_adjoint(v)));
            } else {
                run(b, &|v| lr.a.apply(&lr.b.apply_adjoint(v)));
            }
        }
        for (&b, m) in &self.nearfield {
            if adjoint {
                run(b, &|v| m.apply_adjoint(v));
            } else {
                run(b, &|v| m.apply(v));
            }
        }
        Ok(y)
    }
}

/// ACA on every admissible block, nearfield blocks copied.
pub fn aca_compress<A: MatrixAccess + ?Sized>(
    g: &A,
    tree: &ClusterTree,
    bt: &BlockTree,
    tolerance: f64,
    max_rank: usize,
) -> Result<AcaMatrix> {
    let n = tree.num_indices;
    for found in [g.nrows(), g.ncols()] {
        if found != n {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
    }
    let read = |b: usize| {
        let blk = bt.block(b);
        g.block(&tree.cluster(blk.row).indices, &tree.cluster(blk.col).indices)
    };
    let lowrank = bt
        .admissible
        .par_iter()
        .map(|&b| (b, aca_approximate(&read(b), tolerance, max_rank)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    let nearfield = bt.inadmissible.par_iter().map(|&b| (b, read(b))).collect::<Vec<_>>().into_iter().collect();
    Ok(AcaMatrix {
        tree: tree.clone(),
        blocks: bt.clone(),
        lowrank,
        nearfield,
    })
}
