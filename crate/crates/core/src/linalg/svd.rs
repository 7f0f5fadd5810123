use super::{dotc, norm2, qr, CMatrix, ONE, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `A = U diag(sigma) Vᴴ`.
///
/// For an `m × n` input, `u` is `m × r`, `v` is `n × r` with `r = min(m, n)`.
/// Singular values are sorted non-increasingly. Each left singular vector is
/// normalized so that its largest-magnitude component is real and positive,
/// which makes the factorization reproducible.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> CMatrix {
        let mut us = self.u.clone();
        us.scale_cols(&self.sigma);
        us.mul_adjoint(&self.v)
    }
}

/// Computes the SVD by Householder QR followed by one-sided (Hestenes) Jacobi
/// on the triangular factor.
pub fn svd(a: &CMatrix) -> Result<Svd> {
    if a.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let (u, sigma, v) = if a.rows() >= a.cols() {
        tall_svd(a)?
    } else {
        let (v, sigma, u) = tall_svd(&a.adjoint())?;
        (u, sigma, v)
    };
    Ok(normalize(u, sigma, v))
}

fn tall_svd(a: &CMatrix) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    let (q, r) = qr(a);
    let (w, v) = one_sided_jacobi(r)?;
    let n = w.cols();
    let mut sigma = Vec::with_capacity(n);
    let mut ur = w;
    for j in 0..n {
        let s = norm2(ur.col(j));
        sigma.push(s);
        if s > 0.0 {
            for z in ur.col_mut(j) {
                *z /= s;
            }
        }
    }
    let mut u = q.mul(&ur);
    complete_orthonormal(&mut u, &sigma);
    Ok((u, sigma, v))
}

/// Orthogonalizes the columns of `w` by plane rotations, accumulating them in `v`.
/// On return `w = A V` has mutually orthogonal columns.
fn one_sided_jacobi(mut w: CMatrix) -> Result<(CMatrix, CMatrix)> {
    let n = w.cols();
    let mut v = CMatrix::identity(n);
    let tol = f64::EPSILON * (w.rows().max(1) as f64);

    for _ in 0..MAX_SWEEPS {
        let mut norms: Vec<f64> = (0..n).map(|j| norm2(w.col(j)).powi(2)).collect();
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha < f64::MIN_POSITIVE || beta < f64::MIN_POSITIVE {
                    continue;
                }
                let gamma = dotc(w.col(p), w.col(q));
                let g = gamma.norm();
                if g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, phase, c, s);
                rotate(&mut v, p, q, phase, c, s);
                norms[p] = alpha - t * g;
                norms[q] = beta + t * g;
            }
        }
        if !rotated {
            return Ok((w, v));
        }
    }
    Err(Error::SvdNoConvergence(MAX_SWEEPS))
}

#[inline]
fn rotate(m: &mut CMatrix, p: usize, q: usize, phase: super::c64, c: f64, s: f64) {
    let (cp, cq) = m.col_pair_mut(p, q);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yq = *y * phase;
        let xp = *x;
        *x = xp * c - yq * s;
        *y = xp * s + yq * c;
    }
}

/// Replaces the columns belonging to zero singular values by an orthonormal
/// completion of the remaining ones.
fn complete_orthonormal(u: &mut CMatrix, sigma: &[f64]) {
    let m = u.rows();
    for j in 0..u.cols() {
        if sigma[j] > 0.0 {
            continue;
        }
        let mut best: Option<Vec<super::c64>> = None;
        let mut best_norm = 0.0;
        for e in 0..m {
            let mut cand = vec![ZERO; m];
            cand[e] = ONE;
            for _ in 0..2 {
                for k in 0..u.cols() {
                    if k == j || (sigma[k] == 0.0 && k > j) {
                        continue;
                    }
                    let d = dotc(u.col(k), &cand);
                    super::axpy(-d, u.col(k), &mut cand);
                }
            }
            let nc = norm2(&cand);
            if nc > best_norm {
                best_norm = nc;
                best = Some(cand);
            }
            if nc > 0.5 {
                break;
            }
        }
        let cand = best.expect("orthonormal completion exists while cols <= rows");
        for (d, s) in u.col_mut(j).iter_mut().zip(&cand) {
            *d = s / best_norm;
        }
    }
}

fn normalize(u: CMatrix, sigma: Vec<f64>, v: CMatrix) -> Svd {
    let r = sigma.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let mut u = u.select_cols(&order);
    let mut v = v.select_cols(&order);
    let sigma: Vec<f64> = order.iter().map(|&i| sigma[i]).collect();
    for j in 0..r {
        let col = u.col(j);
        let mut idx = 0;
        let mut mag = -1.0;
        for (i, z) in col.iter().enumerate() {
            if z.norm() > mag {
                mag = z.norm();
                idx = i;
            }
        }
        let pivot = col[idx];
        if pivot.norm() == 0.0 {
            continue;
        }
        let phase = pivot.conj() / pivot.norm();
        for z in u.col_mut(j) {
            *z *= phase;
        }
        for z in v.col_mut(j) {
            *z *= phase;
        }
    }
    Svd { u, sigma, v }
}

/// Smallest rank `k` with `sigma[k] <= tolerance`, capped at `max_rank`.
///
/// Returns 0 for a zero spectrum and at least 1 otherwise, since the leading
/// direction of a nonzero matrix is always kept.
pub fn truncation_rank(sigma: &[f64], tolerance: f64, max_rank: usize) -> usize {
    match sigma.first() {
        None => return 0,
        Some(&s) if s <= 0.0 => return 0,
        _ => {}
    }
    let k = sigma
        .iter()
        .position(|&s| s <= tolerance)
        .unwrap_or(sigma.len())
        .max(1);
    k.min(max_rank)
}
