use super::{axpy, dotc, norm2, CMatrix, ONE, ZERO};

/// Thin Householder QR factorization.
///
/// For an `m × n` matrix with `p = min(m, n)` returns `Q` (`m × p`, orthonormal
/// columns) and upper-trapezoidal `R` (`p × n`) with `A = Q R`.
pub fn qr(a: &CMatrix) -> (CMatrix, CMatrix) {
    let (m, n) = a.shape();
    let p = m.min(n);
    let mut w = a.clone();
    let mut reflectors: Vec<Option<Vec<_>>> = Vec::with_capacity(p);

    for k in 0..p {
        let x = &w.col(k)[k..];
        let nx = norm2(x);
        if nx == 0.0 {
            reflectors.push(None);
            continue;
        }
        let mut v = x.to_vec();
        let x0 = v[0];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let alpha = -phase * nx;
        v[0] -= alpha;
        let nv = norm2(&v);
        for vi in &mut v {
            *vi /= nv;
        }
        for j in k..n {
            let col = &mut w.col_mut(j)[k..];
            let d = dotc(&v, col) * 2.0;
            axpy(-d, &v, col);
        }
        reflectors.push(Some(v));
    }

    let mut r = CMatrix::zeros(p, n);
    for j in 0..n {
        for i in 0..=j.min(p - 1) {
            r[(i, j)] = w[(i, j)];
        }
    }

    let mut q = CMatrix::zeros(m, p);
    for i in 0..p {
        q[(i, i)] = ONE;
    }
    for (k, v) in reflectors.iter().enumerate().rev() {
        let Some(v) = v else { continue };
        for j in 0..p {
            let col = &mut q.col_mut(j)[k..];
            let d = dotc(v, col) * 2.0;
            if d != ZERO {
                axpy(-d, v, col);
            }
        }
    }
    (q, r)
}
