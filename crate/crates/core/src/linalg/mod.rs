//! Dense complex linear algebra.
//!
//! Everything here works on [`CMatrix`], a column-major matrix of `Complex64`
//! entries. The decompositions are written for the small and medium sized
//! blocks that show up in hierarchical compression: leaf blocks with a few
//! dozen rows and a few thousand columns, and stacked coefficient matrices
//! with a few hundred rows.

mod cmx;
mod power;
mod qr;
mod svd;

pub use cmx::{read_cmx, read_cmx_file, write_cmx, write_cmx_file, CMX_MAGIC};
pub use power::power_iteration_norm;
pub use qr::qr;
pub use svd::{svd, truncation_rank, Svd};

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Complex double-precision scalar.
#[allow(non_camel_case_types)]
pub type c64 = Complex64;

pub(crate) const ZERO: c64 = c64::new(0.0, 0.0);
pub(crate) const ONE: c64 = c64::new(1.0, 0.0);

/// Dense complex matrix stored in column-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<c64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> c64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Wraps column-major data. Returns `None` if the length does not match.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<c64>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = c64::new(v, 0.0);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    /// Number of stored complex entries.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[c64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [c64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<c64> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[c64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [c64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Mutable access to two distinct columns.
    pub(crate) fn col_pair_mut(&mut self, a: usize, b: usize) -> (&mut [c64], &mut [c64]) {
        assert!(a < b && b < self.cols);
        let (lo, hi) = self.data.split_at_mut(b * self.rows);
        (&mut lo[a * self.rows..(a + 1) * self.rows], &mut hi[..self.rows])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.data[i * self.cols + j] = self.data[j * self.rows + i].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.data[i * self.cols + j] = self.data[j * self.rows + i];
            }
        }
        out
    }

    /// `self * b`.
    pub fn mul(&self, b: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, b.rows, "mul: inner dimensions differ");
        let mut out = Self::zeros(self.rows, b.cols);
        for j in 0..b.cols {
            let oc = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (l, &blj) in b.col(j).iter().enumerate() {
                if blj == ZERO {
                    continue;
                }
                axpy(blj, self.col(l), oc);
            }
        }
        out
    }

    /// `selfᴴ * b`.
    pub fn adjoint_mul(&self, b: &CMatrix) -> CMatrix {
        assert_eq!(self.rows, b.rows, "adjoint_mul: row counts differ");
        let mut out = Self::zeros(self.cols, b.cols);
        for j in 0..b.cols {
            let bj = b.col(j);
            for i in 0..self.cols {
                out.data[j * self.cols + i] = dotc(self.col(i), bj);
            }
        }
        out
    }

    /// `self * bᴴ`.
    pub fn mul_adjoint(&self, b: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, b.cols, "mul_adjoint: column counts differ");
        let mut out = Self::zeros(self.rows, b.rows);
        for l in 0..self.cols {
            let al = self.col(l);
            let bl = b.col(l);
            for (j, &bjl) in bl.iter().enumerate() {
                let s = bjl.conj();
                if s == ZERO {
                    continue;
                }
                axpy(s, al, &mut out.data[j * self.rows..(j + 1) * self.rows]);
            }
        }
        out
    }

    /// `y += self * x`.
    pub fn gemv_acc(&self, x: &[c64], y: &mut [c64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (j, &xj) in x.iter().enumerate() {
            if xj != ZERO {
                axpy(xj, self.col(j), y);
            }
        }
    }

    /// `y += selfᴴ * x`.
    pub fn adjoint_gemv_acc(&self, x: &[c64], y: &mut [c64]) {
        assert_eq!(x.len(), self.rows);
        assert_eq!(y.len(), self.cols);
        for (j, yj) in y.iter_mut().enumerate() {
            *yj += dotc(self.col(j), x);
        }
    }

    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        let mut y = vec![ZERO; self.rows];
        self.gemv_acc(x, &mut y);
        y
    }

    pub fn apply_adjoint(&self, x: &[c64]) -> Vec<c64> {
        let mut y = vec![ZERO; self.cols];
        self.adjoint_gemv_acc(x, &mut y);
        y
    }

    /// Sub-matrix formed by the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> CMatrix {
        let mut out = Self::zeros(rows.len(), cols.len());
        for (jj, &j) in cols.iter().enumerate() {
            let src = self.col(j);
            let dst = out.col_mut(jj);
            for (d, &i) in dst.iter_mut().zip(rows) {
                *d = src[i];
            }
        }
        out
    }

    pub fn select_cols(&self, cols: &[usize]) -> CMatrix {
        let mut out = Self::zeros(self.rows, cols.len());
        for (jj, &j) in cols.iter().enumerate() {
            out.col_mut(jj).copy_from_slice(self.col(j));
        }
        out
    }

    /// Leading `k` columns.
    pub fn leading_cols(&self, k: usize) -> CMatrix {
        assert!(k <= self.cols);
        Self {
            rows: self.rows,
            cols: k,
            data: self.data[..k * self.rows].to_vec(),
        }
    }

    /// Rows `start..start + len` as a new matrix.
    pub fn row_range(&self, start: usize, len: usize) -> CMatrix {
        assert!(start + len <= self.rows);
        let mut out = Self::zeros(len, self.cols);
        for j in 0..self.cols {
            out.col_mut(j)
                .copy_from_slice(&self.col(j)[start..start + len]);
        }
        out
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(blocks: &[&CMatrix]) -> CMatrix {
        let cols = blocks.first().map_or(0, |b| b.cols);
        assert!(blocks.iter().all(|b| b.cols == cols), "vstack: column counts differ");
        let rows: usize = blocks.iter().map(|b| b.rows).sum();
        let mut out = Self::zeros(rows, cols);
        for j in 0..cols {
            let mut off = 0;
            let dst = out.col_mut(j);
            for b in blocks {
                dst[off..off + b.rows].copy_from_slice(b.col(j));
                off += b.rows;
            }
        }
        out
    }

    /// Places matrices with equal row counts side by side.
    pub fn hstack(blocks: &[&CMatrix]) -> CMatrix {
        let rows = blocks.first().map_or(0, |b| b.rows);
        assert!(blocks.iter().all(|b| b.rows == rows), "hstack: row counts differ");
        let mut data = Vec::with_capacity(rows * blocks.iter().map(|b| b.cols).sum::<usize>());
        for b in blocks {
            data.extend_from_slice(&b.data);
        }
        let cols = blocks.iter().map(|b| b.cols).sum();
        Self { rows, cols, data }
    }

    pub fn scale(&mut self, s: c64) {
        for z in &mut self.data {
            *z *= s;
        }
    }

    pub fn scaled(&self, s: c64) -> CMatrix {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// Multiplies column `j` by `s[j]`.
    pub fn scale_cols(&mut self, s: &[f64]) {
        assert_eq!(s.len(), self.cols);
        for (j, &sj) in s.iter().enumerate() {
            for z in self.col_mut(j) {
                *z *= sj;
            }
        }
    }

    pub fn sub(&self, b: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), b.shape());
        let data = self.data.iter().zip(&b.data).map(|(x, y)| x - y).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn add_assign(&mut self, b: &CMatrix) {
        assert_eq!(self.shape(), b.shape());
        for (x, y) in self.data.iter_mut().zip(&b.data) {
            *x += y;
        }
    }

    pub fn norm_fro(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Spectral norm computed from the singular values.
    pub fn norm_2(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        match svd(self) {
            Ok(s) => s.sigma.first().copied().unwrap_or(0.0),
            Err(_) => f64::NAN,
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = c64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &c64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut c64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

/// `y += a * x`.
#[inline]
pub fn axpy(a: c64, x: &[c64], y: &mut [c64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `xᴴ y`.
#[inline]
pub fn dotc(x: &[c64], y: &[c64]) -> c64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (a, b) in x.iter().zip(y) {
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    c64::new(re, im)
}

pub fn norm2(x: &[c64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
