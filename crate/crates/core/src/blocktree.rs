//! Block trees over pairs of clusters with directional admissibility.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::clustering::{BoundingBox, ClusterTree};
use crate::directions::DirectionHierarchy;
use crate::error::{Error, Result};
use crate::geometry::sub;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockStatus {
    Admissible,
    Inadmissible,
    Subdivided,
}

impl BlockStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlockStatus::Admissible => "admissible",
            BlockStatus::Inadmissible => "inadmissible",
            BlockStatus::Subdivided => "subdivided",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: usize,
    pub row: usize,
    pub col: usize,
    pub level: usize,
    pub status: BlockStatus,
    /// Index into the direction set of `level`, only for admissible leaves.
    pub direction: Option<usize>,
    pub sons: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub wave_number: f64,
    pub eta2: f64,
    /// Drop the parabolic condition and keep only the standard one.
    pub standard_only: bool,
}

impl Admissibility {
    pub fn new(wave_number: f64, eta2: f64) -> Self {
        Self {
            wave_number,
            eta2,
            standard_only: false,
        }
    }

    pub fn standard(wave_number: f64, eta2: f64) -> Self {
        Self {
            wave_number,
            eta2,
            standard_only: true,
        }
    }

    pub fn check(&self, bt: &BoundingBox, bs: &BoundingBox) -> bool {
        if self.standard_only {
            is_admissible(bt, bs, 0.0, self.eta2)
        } else {
            is_admissible(bt, bs, self.wave_number, self.eta2)
        }
    }
}

/// Parabolic and standard admissibility of two boxes. Touching boxes are never admissible.
pub fn is_admissible(bt: &BoundingBox, bs: &BoundingBox, wave_number: f64, eta2: f64) -> bool {
    let dist = bt.distance(bs);
    if dist <= 0.0 {
        return false;
    }
    let diam = bt.diameter().max(bs.diameter());
    wave_number * diam * diam <= eta2 * dist && diam <= eta2 * dist
}

/// Block tree with blocks in depth-first pre-order; the root block has id 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockTree {
    pub blocks: Vec<Block>,
    pub admissible: Vec<usize>,
    pub inadmissible: Vec<usize>,
    pub admissibility: Admissibility,
}

impl BlockTree {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, id: usize) -> &Block {
        &self.blocks[id]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(|b| b.status != BlockStatus::Subdivided)
    }

    /// CSV with columns `tLevel,tId,sId,status,directionIndex`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tLevel,tId,sId,status,directionIndex")?;
        for b in &self.blocks {
            let dir = b.direction.map(|d| d.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", b.level, b.row, b.col, b.status.as_str(), dir)?;
        }
        Ok(())
    }
}

pub fn build_block_tree(
    tree: &ClusterTree,
    dirs: &DirectionHierarchy,
    adm: Admissibility,
) -> Result<BlockTree> {
    if dirs.levels() != tree.depth + 1 {
        return Err(Error::DimensionMismatch {
            expected: tree.depth + 1,
            found: dirs.levels(),
        });
    }
    if !(adm.eta2 > 0.0) || !(adm.wave_number >= 0.0) {
        return Err(Error::InvalidConfig("eta2 must be positive and the wave number non-negative".into()));
    }
    let mut bt = BlockTree {
        blocks: Vec::new(),
        admissible: Vec::new(),
        inadmissible: Vec::new(),
        admissibility: adm,
    };
    subdivide(&mut bt, tree, dirs, 0, 0)?;
    Ok(bt)
}

fn subdivide(bt: &mut BlockTree, tree: &ClusterTree, dirs: &DirectionHierarchy, t: usize, s: usize) -> Result<usize> {
    let (ct, cs) = (tree.cluster(t), tree.cluster(s));
    let id = bt.blocks.len();
    let mut block = Block {
        id,
        row: t,
        col: s,
        level: ct.level,
        status: BlockStatus::Subdivided,
        direction: None,
        sons: Vec::new(),
    };
    if bt.admissibility.check(&ct.bbox, &cs.bbox) {
        let z = sub(&ct.bbox.center(), &cs.bbox.center());
        block.status = BlockStatus::Admissible;
        block.direction = Some(dirs.nearest(ct.level, &z)?);
        bt.admissible.push(id);
        bt.blocks.push(block);
        return Ok(id);
    }
    if ct.is_leaf() || cs.is_leaf() {
        block.status = BlockStatus::Inadmissible;
        bt.inadmissible.push(id);
        bt.blocks.push(block);
        return Ok(id);
    }
    bt.blocks.push(block);
    let mut sons = Vec::with_capacity(ct.sons.len() * cs.sons.len());
    for &ts in &ct.sons {
        for &ss in &cs.sons {
            sons.push(subdivide(bt, tree, dirs, ts, ss)?);
        }
    }
    bt.blocks[id].sons = sons;
    Ok(id)
}

/// Directions for which cluster bases are needed: `row[t]` holds every `c` such that
/// an admissible block `(t+, s)` with `t+` an ancestor of `t` (or `t` itself) has a
/// block direction whose son chain reaches `c` on the level of `t`. `col` likewise
/// for the column clusters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsedDirections {
    pub row: Vec<BTreeSet<usize>>,
    pub col: Vec<BTreeSet<usize>>,
}

pub fn used_directions(tree: &ClusterTree, dirs: &DirectionHierarchy, bt: &BlockTree) -> UsedDirections {
    let mut row = vec![BTreeSet::new(); tree.len()];
    let mut col = vec![BTreeSet::new(); tree.len()];
    for &b in &bt.admissible {
        let blk = &bt.blocks[b];
        let c = blk.direction.expect("admissible block has a direction");
        row[blk.row].insert(c);
        col[blk.col].insert(c);
    }
    // ids are pre-order, so fathers come first
    for t in 0..tree.len() {
        let cl = tree.cluster(t);
        if cl.sons.is_empty() {
            continue;
        }
        let inherited_row: Vec<usize> = row[t].iter().map(|&c| dirs.son(cl.level, c)).collect();
        let inherited_col: Vec<usize> = col[t].iter().map(|&c| dirs.son(cl.level, c)).collect();
        for &s in &cl.sons {
            row[s].extend(inherited_row.iter().copied());
            col[s].extend(inherited_col.iter().copied());
        }
    }
    UsedDirections { row, col }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: usize,
    pub clusters: usize,
    pub max_row: usize,
    pub mean_row: f64,
    pub max_col: usize,
    pub mean_col: f64,
    pub directions: usize,
    pub max_used_row_directions: usize,
    pub max_used_col_directions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityStats {
    /// `#row(t)`: number of blocks `(t, s)` in the block tree.
    pub row_counts: Vec<usize>,
    pub col_counts: Vec<usize>,
    pub per_level: Vec<LevelStats>,
    pub used: UsedDirections,
}

impl SparsityStats {
    pub fn max_row(&self) -> usize {
        self.row_counts.iter().copied().max().unwrap_or(0)
    }

    pub fn max_col(&self) -> usize {
        self.col_counts.iter().copied().max().unwrap_or(0)
    }
}

pub fn sparsity_stats(tree: &ClusterTree, dirs: &DirectionHierarchy, bt: &BlockTree) -> SparsityStats {
    let mut row_counts = vec![0; tree.len()];
    let mut col_counts = vec![0; tree.len()];
    for b in &bt.blocks {
        row_counts[b.row] += 1;
        col_counts[b.col] += 1;
    }
    let used = used_directions(tree, dirs, bt);
    let per_level = (0..=tree.depth)
        .map(|level| {
            let ids: Vec<usize> = tree.level(level).map(|c| c.id).collect();
            let n = ids.len().max(1) as f64;
            let max_of = |v: &[usize]| ids.iter().map(|&i| v[i]).max().unwrap_or(0);
            let mean_of = |v: &[usize]| ids.iter().map(|&i| v[i]).sum::<usize>() as f64 / n;
            LevelStats {
                level,
                clusters: ids.len(),
                max_row: max_of(&row_counts),
                mean_row: mean_of(&row_counts),
                max_col: max_of(&col_counts),
                mean_col: mean_of(&col_counts),
                directions: dirs.count(level),
                max_used_row_directions: ids.iter().map(|&i| used.row[i].len()).max().unwrap_or(0),
                max_used_col_directions: ids.iter().map(|&i| used.col[i].len()).max().unwrap_or(0),
            }
        })
        .collect();
    SparsityStats {
        row_counts,
        col_counts,
        per_level,
        used,
    }
}
