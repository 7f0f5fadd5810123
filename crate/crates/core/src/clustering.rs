//! Geometric cluster trees.
//!
//! Clusters are built by regular octree subdivision of the bounding cube of the
//! support points. Afterwards every box on a level is padded to the common
//! level extent, so all boxes of one level are translates of each other.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, Point3};

/// Axis-parallel box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Point3,
    pub max: Point3,
}

impl BoundingBox {
    pub fn new(min: Point3, max: Point3) -> Self {
        Self { min, max }
    }

    pub fn around(points: impl IntoIterator<Item = Point3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = Self::new(first, first);
        for p in it {
            for k in 0..3 {
                b.min[k] = b.min[k].min(p[k]);
                b.max[k] = b.max[k].max(p[k]);
            }
        }
        Some(b)
    }

    pub fn center(&self) -> Point3 {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    pub fn extent(&self) -> Point3 {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    /// Length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        norm(&self.extent())
    }

    /// Euclidean distance between two boxes (zero if they intersect).
    pub fn distance(&self, other: &BoundingBox) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let gap = (other.min[k] - self.max[k]).max(self.min[k] - other.max[k]).max(0.0);
            d2 += gap * gap;
        }
        d2.sqrt()
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    /// Sorted indices of the support points.
    pub indices: Vec<usize>,
    pub level: usize,
    pub parent: Option<usize>,
    pub sons: Vec<usize>,
    pub bbox: BoundingBox,
}

impl Cluster {
    pub fn is_leaf(&self) -> bool {
        self.sons.is_empty()
    }

    pub fn size(&self) -> usize {
        self.indices.len()
    }
}

/// Cluster tree with translation-equivalent boxes per level.
///
/// Cluster ids follow a depth-first pre-order, so every son has a larger id than
/// its father and the root has id 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterTree {
    pub clusters: Vec<Cluster>,
    pub depth: usize,
    /// Common box extent of each level.
    pub level_extents: Vec<Point3>,
    /// Number of indices covered by the root.
    pub num_indices: usize,
}

impl ClusterTree {
    pub fn root(&self) -> &Cluster {
        &self.clusters[0]
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn cluster(&self, id: usize) -> &Cluster {
        &self.clusters[id]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(|c| c.is_leaf())
    }

    pub fn level(&self, level: usize) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(move |c| c.level == level)
    }

    pub fn max_sons(&self) -> usize {
        self.clusters.iter().map(|c| c.sons.len()).max().unwrap_or(0)
    }

    /// Diameter of the common box on `level`.
    pub fn level_diameter(&self, level: usize) -> Result<f64> {
        self.level_extents
            .get(level)
            .map(norm)
            .ok_or(Error::LevelOutOfRange {
                level,
                depth: self.depth,
            })
    }

    pub fn level_diameters(&self) -> Vec<f64> {
        self.level_extents.iter().map(norm).collect()
    }

    /// `t` itself followed by all of its descendants, pre-order.
    pub fn descendants(&self, t: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![t];
        while let Some(c) = stack.pop() {
            out.push(c);
            stack.extend(self.clusters[c].sons.iter().rev());
        }
        out
    }

    /// True if `a` is `d` or one of its ancestors.
    pub fn is_ancestor_or_self(&self, a: usize, mut d: usize) -> bool {
        loop {
            if a == d {
                return true;
            }
            match self.clusters[d].parent {
                Some(p) => d = p,
                None => return false,
            }
        }
    }

    /// One JSON object per cluster: id, level, parent, box corners and index count.
    pub fn write_json_lines<W: Write>(&self, mut w: W) -> Result<()> {
        for c in &self.clusters {
            let line = serde_json::json!({
                "id": c.id,
                "level": c.level,
                "parent": c.parent,
                "min": c.bbox.min,
                "max": c.bbox.max,
                "count": c.indices.len(),
            });
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// How a cluster is divided into sons.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRule {
    /// Regular octree cells, only nonempty octants are kept.
    #[default]
    Octree,
    /// Halve the tight box along its longest axis; always two sons.
    Bisection,
}

/// Builds the cluster tree for point supports of zero radius.
pub fn build_cluster_tree(points: &[Point3], leaf_size: usize) -> Result<ClusterTree> {
    build_cluster_tree_with_radii(points, &vec![0.0; points.len()], leaf_size)
}

/// Builds the cluster tree; `radii[i]` bounds the support of basis function `i`
/// around `points[i]` and enlarges the padded boxes accordingly.
pub fn build_cluster_tree_with_radii(
    points: &[Point3],
    radii: &[f64],
    leaf_size: usize,
) -> Result<ClusterTree> {
    build_cluster_tree_with(points, radii, leaf_size, SplitRule::Octree)
}

pub fn build_cluster_tree_with(
    points: &[Point3],
    radii: &[f64],
    leaf_size: usize,
    rule: SplitRule,
) -> Result<ClusterTree> {
    if points.is_empty() {
        return Err(Error::InvalidConfig("cluster tree needs at least one point".into()));
    }
    if leaf_size == 0 {
        return Err(Error::InvalidConfig("leaf size must be positive".into()));
    }
    if radii.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: radii.len(),
        });
    }
    let root_box = BoundingBox::around(points.iter().copied()).expect("nonempty");
    let ext = root_box.extent();
    let half = 0.5 * ext[0].max(ext[1]).max(ext[2]);
    let mut builder = Builder {
        points,
        leaf_size,
        rule,
        clusters: Vec::new(),
        min_half: half * 1e-13,
    };
    builder.split((0..points.len()).collect(), root_box.center(), half, 0, None);
    let mut clusters = builder.clusters;

    let depth = clusters.iter().map(|c| c.level).max().unwrap_or(0);
    let mut extents = vec![[0.0f64; 3]; depth + 1];
    let mut pads = vec![0.0f64; depth + 1];
    for c in &clusters {
        let e = c.bbox.extent();
        for k in 0..3 {
            extents[c.level][k] = extents[c.level][k].max(e[k]);
        }
        for &i in &c.indices {
            pads[c.level] = pads[c.level].max(radii[i]);
        }
    }
    for (e, p) in extents.iter_mut().zip(&pads) {
        for v in e.iter_mut() {
            *v += 2.0 * p;
        }
    }
    for c in &mut clusters {
        let m = c.bbox.center();
        let e = extents[c.level];
        c.bbox = BoundingBox::new(
            [m[0] - 0.5 * e[0], m[1] - 0.5 * e[1], m[2] - 0.5 * e[2]],
            [m[0] + 0.5 * e[0], m[1] + 0.5 * e[1], m[2] + 0.5 * e[2]],
        );
    }
    Ok(ClusterTree {
        clusters,
        depth,
        level_extents: extents,
        num_indices: points.len(),
    })
}

struct Builder<'a> {
    points: &'a [Point3],
    leaf_size: usize,
    rule: SplitRule,
    clusters: Vec<Cluster>,
    min_half: f64,
}

impl Builder<'_> {
    fn split(
        &mut self,
        indices: Vec<usize>,
        mut center: Point3,
        mut half: f64,
        level: usize,
        parent: Option<usize>,
    ) -> usize {
        let id = self.clusters.len();
        let bbox = BoundingBox::around(indices.iter().map(|&i| self.points[i])).expect("nonempty cluster");
        self.clusters.push(Cluster {
            id,
            indices: indices.clone(),
            level,
            parent,
            sons: Vec::new(),
            bbox,
        });
        if indices.len() <= self.leaf_size || bbox.diameter() == 0.0 {
            return id;
        }

        if self.rule == SplitRule::Bisection {
            let e = bbox.extent();
            let axis = (0..3).fold(0, |a, k| if e[k] > e[a] { k } else { a });
            let mid = bbox.center()[axis];
            let (lo, hi): (Vec<usize>, Vec<usize>) = indices.iter().partition(|&&i| self.points[i][axis] <= mid);
            let a = self.split(lo, center, half, level + 1, Some(id));
            let b = self.split(hi, center, half, level + 1, Some(id));
            self.clusters[id].sons = vec![a, b];
            return id;
        }

        // Octants that stay nonempty; a lone child is split again in place.
        let groups = loop {
            if half <= self.min_half {
                return id;
            }
            let mut groups: [Vec<usize>; 8] = Default::default();
            for &i in &indices {
                let p = &self.points[i];
                let o = (0..3).fold(0, |acc, k| acc | (usize::from(p[k] > center[k]) << k));
                groups[o].push(i);
            }
            let nonempty = groups.iter().filter(|g| !g.is_empty()).count();
            if nonempty >= 2 {
                break groups;
            }
            let o = groups.iter().position(|g| !g.is_empty()).expect("indices nonempty");
            center = octant_center(&center, half, o);
            half *= 0.5;
        };

        let mut sons = Vec::new();
        for (o, g) in groups.into_iter().enumerate() {
            if g.is_empty() {
                continue;
            }
            let c = octant_center(&center, half, o);
            sons.push(self.split(g, c, 0.5 * half, level + 1, Some(id)));
        }
        self.clusters[id].sons = sons;
        id
    }
}

fn octant_center(center: &Point3, half: f64, octant: usize) -> Point3 {
    let q = 0.5 * half;
    let mut c = *center;
    for (k, v) in c.iter_mut().enumerate() {
        *v += if octant >> k & 1 == 1 { q } else { -q };
    }
    c
}
