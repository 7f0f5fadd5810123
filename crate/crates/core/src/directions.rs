//! Hierarchical direction sets obtained by projecting square midpoints of the
//! cube `[-1,1]^3` onto the unit sphere.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, Point3};

/// Direction sets per level plus the son maps linking level `l` to `l + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionHierarchy {
    pub per_level: Vec<Vec<Point3>>,
    /// `son_map[l][c]` is the index in level `l + 1` nearest to direction `c` of level `l`.
    pub son_map: Vec<Vec<usize>>,
    /// Squares per face edge, 0 where the level only has the zero direction.
    pub grid: Vec<usize>,
    pub wave_number: f64,
    pub eta1: f64,
}

impl DirectionHierarchy {
    pub fn levels(&self) -> usize {
        self.per_level.len()
    }

    pub fn directions(&self, level: usize) -> &[Point3] {
        &self.per_level[level]
    }

    pub fn direction(&self, level: usize, index: usize) -> Point3 {
        self.per_level[level][index]
    }

    pub fn count(&self, level: usize) -> usize {
        self.per_level[level].len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.per_level.iter().map(Vec::len).collect()
    }

    pub fn is_zero_level(&self, level: usize) -> bool {
        self.grid[level] == 0
    }

    /// Index of the son direction of `index` on `level + 1`.
    pub fn son(&self, level: usize, index: usize) -> usize {
        self.son_map[level][index]
    }

    /// Follows the son maps from `(level, index)` down to `target` (inclusive of no-op).
    pub fn descend(&self, level: usize, mut index: usize, target: usize) -> usize {
        for l in level..target {
            index = self.son_map[l][index];
        }
        index
    }

    /// Index of the direction on `level` nearest to `z`.
    pub fn nearest(&self, level: usize, z: &Point3) -> Result<usize> {
        nearest_direction(&self.per_level[level], z)
    }
}

/// Builds `D_l` for every level from the level box diameters.
pub fn build_directions(level_diameters: &[f64], wave_number: f64, eta1: f64) -> Result<DirectionHierarchy> {
    if !(eta1 > 0.0 && eta1.is_finite()) {
        return Err(Error::InvalidConfig(format!("eta1 must be positive, got {eta1}")));
    }
    if !(wave_number >= 0.0 && wave_number.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "wave number must be non-negative, got {wave_number}"
        )));
    }
    if level_diameters.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::InvalidConfig("level diameters must be finite and non-negative".into()));
    }
    if level_diameters.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
        return Err(Error::InvalidConfig("level diameters must be non-increasing".into()));
    }

    let mut per_level = Vec::with_capacity(level_diameters.len());
    let mut grid = Vec::with_capacity(level_diameters.len());
    for &delta in level_diameters {
        let m = grid_size(wave_number * delta, eta1);
        grid.push(m);
        per_level.push(if m == 0 { vec![[0.0; 3]] } else { cube_face_directions(m) });
    }
    let son_map = per_level
        .windows(2)
        .map(|w| {
            w[0].iter()
                .map(|c| nearest_unnormalized(&w[1], c))
                .collect()
        })
        .collect();
    Ok(DirectionHierarchy {
        per_level,
        son_map,
        grid,
        wave_number,
        eta1,
    })
}

/// Smallest number of squares per face edge whose diagonal `2*sqrt(2)/m` does not
/// exceed `2*eta1/(kappa*delta)`; 0 if a single square already suffices.
pub fn grid_size(kappa_delta: f64, eta1: f64) -> usize {
    let x = std::f64::consts::SQRT_2 * kappa_delta / eta1;
    if x <= 1.0 {
        0
    } else {
        x.ceil() as usize
    }
}

/// Projected midpoints of an `m x m` grid on each face of the cube, faces in the
/// order `+x, -x, +y, -y, +z, -z`, squares row-major within a face.
pub fn cube_face_directions(m: usize) -> Vec<Point3> {
    let mut out = Vec::with_capacity(6 * m * m);
    let coord = |i: usize| -1.0 + (2 * i + 1) as f64 / m as f64;
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
            for i in 0..m {
                for j in 0..m {
                    let mut v = [0.0; 3];
                    v[axis] = sign;
                    v[a] = coord(i);
                    v[b] = coord(j);
                    out.push(project_to_sphere(&v).expect("cube surface point"));
                }
            }
        }
    }
    out
}

pub fn project_to_sphere(v: &Point3) -> Result<Point3> {
    let n = norm(v);
    if n < 1e-12 {
        return Err(Error::Domain("cannot project a vector of norm < 1e-12".into()));
    }
    Ok([v[0] / n, v[1] / n, v[2] / n])
}

/// Index of the direction nearest to `z / |z|`. A zero-only set always yields 0.
pub fn nearest_direction(dirs: &[Point3], z: &Point3) -> Result<usize> {
    if dirs.is_empty() {
        return Err(Error::InvalidConfig("empty direction set".into()));
    }
    if dirs.len() == 1 && dirs[0] == [0.0; 3] {
        return Ok(0);
    }
    let u = project_to_sphere(z)?;
    Ok(nearest_unnormalized(dirs, &u))
}

fn nearest_unnormalized(dirs: &[Point3], z: &Point3) -> usize {
    let dist2 = |c: &Point3| (0..3).map(|k| (z[k] - c[k]).powi(2)).sum::<f64>();
    let mut best = 0;
    let mut best_d = dist2(&dirs[0]);
    for (i, c) in dirs.iter().enumerate().skip(1) {
        let d = dist2(c);
        if d < best_d || (d == best_d && lex_cmp(c, &dirs[best]) == Ordering::Less) {
            best = i;
            best_d = d;
        }
    }
    best
}

fn lex_cmp(a: &Point3, b: &Point3) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

#[cfg(test)]
pub(crate) fn random_unit_vectors(count: usize, seed: u64) -> Vec<Point3> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let v: Point3 = [
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ];
            if norm(&v) > 1e-6 {
                break project_to_sphere(&v).unwrap();
            }
        })
        .collect()
}
