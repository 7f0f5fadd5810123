use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::blocktree::BlockTree;
use crate::clustering::ClusterTree;
use crate::directions::DirectionHierarchy;

/// Which side of the block tree a basis is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Row,
    Col,
}

/// One member of a farfield set: the partner cluster and the admissible block it comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FarEntry {
    pub cluster: usize,
    pub block: usize,
}

/// `sets[t][c]` lists the partner clusters `F_tc` sorted by cluster id; the index
/// set `𝓕_tc` is the concatenation of their index lists in that order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarfieldSets {
    pub side: Side,
    pub sets: Vec<BTreeMap<usize, Vec<FarEntry>>>,
}

impl FarfieldSets {
    pub fn get(&self, t: usize, c: usize) -> &[FarEntry] {
        self.sets[t].get(&c).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The concatenated index set `𝓕_tc`.
    pub fn indices(&self, tree: &ClusterTree, t: usize, c: usize) -> Vec<usize> {
        self.get(t, c)
            .iter()
            .flat_map(|e| tree.cluster(e.cluster).indices.iter().copied())
            .collect()
    }

    /// `Σ_c #𝓕_tc` for every cluster.
    pub fn total_sizes(&self, tree: &ClusterTree) -> Vec<usize> {
        self.sets
            .iter()
            .map(|m| m.values().flatten().map(|e| tree.cluster(e.cluster).size()).sum())
            .collect()
    }
}

/// Column positions inside `𝓕_{t'c'}` of the partner clusters listed in `sub`,
/// where `sub ⊆ sup` as cluster lists.
pub(crate) fn restrict_columns(tree: &ClusterTree, sup: &[FarEntry], sub: &[FarEntry]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut offset = 0;
    let mut it = sub.iter().peekable();
    for e in sup {
        let len = tree.cluster(e.cluster).size();
        if let Some(s) = it.peek() {
            if s.cluster == e.cluster {
                out.extend(offset..offset + len);
                it.next();
            }
        }
        offset += len;
    }
    debug_assert!(it.peek().is_none(), "farfield sets are not nested");
    out
}

/// Farfield sets for the row side (`F_tc`) or the column side (the same
/// construction applied to the transposed block tree).
pub fn farfield_sets(tree: &ClusterTree, dirs: &DirectionHierarchy, bt: &BlockTree, side: Side) -> FarfieldSets {
    let mut sets: Vec<BTreeMap<usize, Vec<FarEntry>>> = vec![BTreeMap::new(); tree.len()];
    for &b in &bt.admissible {
        let blk = bt.block(b);
        let (t, s) = match side {
            Side::Row => (blk.row, blk.col),
            Side::Col => (blk.col, blk.row),
        };
        let c = blk.direction.expect("admissible block has a direction");
        sets[t].entry(c).or_default().push(FarEntry { cluster: s, block: b });
    }
    for t in 0..tree.len() {
        let cl = tree.cluster(t);
        if cl.sons.is_empty() || sets[t].is_empty() {
            continue;
        }
        let inherited: Vec<(usize, Vec<FarEntry>)> = sets[t]
            .iter()
            .map(|(&c, v)| (dirs.son(cl.level, c), v.clone()))
            .collect();
        for &s in &cl.sons {
            for (c, v) in &inherited {
                sets[s].entry(*c).or_default().extend(v.iter().copied());
            }
        }
    }
    for m in &mut sets {
        for v in m.values_mut() {
            v.sort_unstable();
        }
    }
    FarfieldSets { side, sets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocktree::{build_block_tree, used_directions, Admissibility};
    use crate::clustering::build_cluster_tree_with_radii;
    use crate::directions::build_directions;
    use crate::geometry::build_sphere_mesh;

    fn setup(kappa: f64, eta1: f64) -> (ClusterTree, DirectionHierarchy, BlockTree) {
        let m = build_sphere_mesh(3).unwrap();
        let tree = build_cluster_tree_with_radii(&m.midpoints, &m.radii, 4).unwrap();
        let dirs = build_directions(&tree.level_diameters(), kappa, eta1).unwrap();
        let bt = build_block_tree(&tree, &dirs, Admissibility::new(kappa, 5.0)).unwrap();
        (tree, dirs, bt)
    }

    #[test]
    fn matches_brute_force_scan() {
        let (tree, dirs, bt) = setup(4.0, 1.0);
        for side in [Side::Row, Side::Col] {
            let far = farfield_sets(&tree, &dirs, &bt, side);
            for cl in &tree.clusters {
                let t = cl.id;
                let mut expect: BTreeMap<usize, Vec<FarEntry>> = BTreeMap::new();
                for &b in &bt.admissible {
                    let blk = bt.block(b);
                    let (tp, s) = match side {
                        Side::Row => (blk.row, blk.col),
                        Side::Col => (blk.col, blk.row),
                    };
                    if !tree.is_ancestor_or_self(tp, t) {
                        continue;
                    }
                    let c = dirs.descend(blk.level, blk.direction.unwrap(), cl.level);
                    expect.entry(c).or_default().push(FarEntry { cluster: s, block: b });
                }
                for v in expect.values_mut() {
                    v.sort_unstable();
                }
                assert_eq!(far.sets[t], expect, "cluster {t}");
            }
        }
    }

    #[test]
    fn keys_are_used_directions() {
        let (tree, dirs, bt) = setup(4.0, 1.0);
        let used = used_directions(&tree, &dirs, &bt);
        let row = farfield_sets(&tree, &dirs, &bt, Side::Row);
        let col = farfield_sets(&tree, &dirs, &bt, Side::Col);
        for t in 0..tree.len() {
            assert!(row.sets[t].keys().copied().eq(used.row[t].iter().copied()));
            assert!(col.sets[t].keys().copied().eq(used.col[t].iter().copied()));
        }
    }

    #[test]
    fn index_sets_are_disjoint_and_nested() {
        let (tree, dirs, bt) = setup(4.0, 1.0);
        let far = farfield_sets(&tree, &dirs, &bt, Side::Row);
        for cl in &tree.clusters {
            let total: usize = far.total_sizes(&tree)[cl.id];
            assert!(total <= tree.num_indices);
            for (&c, list) in &far.sets[cl.id] {
                let mut idx = far.indices(&tree, cl.id, c);
                let len = idx.len();
                idx.sort_unstable();
                idx.dedup();
                assert_eq!(idx.len(), len);
                for &s in &cl.sons {
                    let sup = far.get(s, dirs.son(cl.level, c));
                    let pos = restrict_columns(&tree, sup, list);
                    let sup_idx = far.indices(&tree, s, dirs.son(cl.level, c));
                    let picked: Vec<usize> = pos.iter().map(|&p| sup_idx[p]).collect();
                    assert_eq!(picked, far.indices(&tree, cl.id, c));
                }
            }
        }
    }

    #[test]
    fn root_with_single_admissible_block() {
        let pts = vec![[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [10.0, 0.0, 0.0], [10.1, 0.0, 0.0]];
        let tree = crate::clustering::build_cluster_tree(&pts, 2).unwrap();
        let dirs = build_directions(&tree.level_diameters(), 0.0, 20.0).unwrap();
        let bt = build_block_tree(&tree, &dirs, Admissibility::new(0.0, 5.0)).unwrap();
        let far = farfield_sets(&tree, &dirs, &bt, Side::Row);
        assert!(far.sets[0].is_empty());
        let (a, b) = (tree.root().sons[0], tree.root().sons[1]);
        assert_eq!(far.get(a, 0).iter().map(|e| e.cluster).collect::<Vec<_>>(), vec![b]);
    }
}
