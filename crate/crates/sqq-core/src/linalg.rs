//! Small dense linear algebra: row-major matrices, partial-pivot LU, and the
//! vector helpers the solver and step assembly need. The systems here stay
//! small (a few hundred unknowns at most), so a straightforward dense
//! implementation is the right tool.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    #[inline(always)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline(always)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline(always)]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline(always)]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] += v;
    }

    #[inline(always)]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline(always)]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// Resize in place, discarding contents.
    pub fn reset(&mut self, rows: usize, cols: usize) {
        self.rows = rows;
        self.cols = cols;
        self.data.clear();
        self.data.resize(rows * cols, 0.0);
    }

    /// `out = self * x`.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for i in 0..self.rows {
            out[i] = dot(self.row(i), x);
        }
    }

    /// `out = self^T * x`.
    pub fn matvec_transposed(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.rows {
            let xi = x[i];
            if xi != 0.0 {
                axpy(xi, self.row(i), out);
            }
        }
    }

    /// Rank-one update `self += scale * u * v^T`.
    pub fn rank_one_update(&mut self, scale: f64, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for i in 0..self.rows {
            let c = scale * u[i];
            if c != 0.0 {
                axpy(c, v, self.row_mut(i));
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        inf_norm(&self.data)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `y += a * x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for i in 0..x.len() {
        y[i] += a * x[i];
    }
}

#[inline]
pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, &x| m.max(math::abs(x)))
}

#[inline]
pub fn two_norm(v: &[f64]) -> f64 {
    math::sqrt(dot(v, v))
}

/// Partial-pivot LU factorization of a square matrix.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: Mat,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn factor(a: &Mat) -> Result<Self> {
        assert_eq!(a.rows(), a.cols(), "LU requires a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_val = math::abs(lu.at(k, k));
            for i in (k + 1)..n {
                let v = math::abs(lu.at(i, k));
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = i;
                }
            }
            if pivot_val == 0.0 {
                return Err(Error::SingularMatrix);
            }
            if pivot_row != k {
                perm.swap(k, pivot_row);
                for j in 0..n {
                    let tmp = lu.at(k, j);
                    lu.set(k, j, lu.at(pivot_row, j));
                    lu.set(pivot_row, j, tmp);
                }
            }
            let inv_pivot = 1.0 / lu.at(k, k);
            for i in (k + 1)..n {
                let factor = lu.at(i, k) * inv_pivot;
                lu.set(i, k, factor);
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        let v = lu.at(i, j) - factor * lu.at(k, j);
                        lu.set(i, j, v);
                    }
                }
            }
        }
        Ok(LuFactors { lu, perm })
    }

    pub fn size(&self) -> usize {
        self.lu.rows()
    }

    /// Solve `A x = b` into `x`.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.size();
        debug_assert_eq!(b.len(), n);
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            x[i] = b[self.perm[i]];
        }
        // Forward substitution with unit lower triangle.
        for i in 1..n {
            let mut s = x[i];
            let row = self.lu.row(i);
            for j in 0..i {
                s -= row[j] * x[j];
            }
            x[i] = s;
        }
        // Back substitution.
        for i in (0..n).rev() {
            let mut s = x[i];
            let row = self.lu.row(i);
            for j in (i + 1)..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
    }

    /// Solve with one step of iterative refinement against the original
    /// matrix. Returns the max-norm of the final residual `A x - b`.
    pub fn solve_refined(&self, a: &Mat, b: &[f64], x: &mut [f64], scratch: &mut RefineScratch) -> f64 {
        let n = self.size();
        self.solve_into(b, x);
        // r = b - A x
        a.matvec(x, &mut scratch.residual);
        for i in 0..n {
            scratch.residual[i] = b[i] - scratch.residual[i];
        }
        self.solve_into(&scratch.residual, &mut scratch.correction);
        for i in 0..n {
            x[i] += scratch.correction[i];
        }
        a.matvec(x, &mut scratch.residual);
        let mut res = 0.0_f64;
        for i in 0..n {
            res = res.max(math::abs(scratch.residual[i] - b[i]));
        }
        res
    }

    /// Dense inverse, column by column.
    pub fn inverse(&self) -> Mat {
        let n = self.size();
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.solve_into(&e, &mut col);
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
            e[j] = 0.0;
        }
        inv
    }
}

/// Reusable buffers for [`LuFactors::solve_refined`].
#[derive(Debug, Clone)]
pub struct RefineScratch {
    residual: Vec<f64>,
    correction: Vec<f64>,
}

impl RefineScratch {
    pub fn new(n: usize) -> Self {
        RefineScratch {
            residual: vec![0.0; n],
            correction: vec![0.0; n],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lu_solves_small_system() {
        let a = Mat::from_rows(3, 3, vec![2.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 2.0, 3.0]);
        let b = [2.0, 3.0, -10.0];
        let lu = LuFactors::factor(&a).unwrap();
        let mut x = [0.0; 3];
        lu.solve_into(&b, &mut x);
        let mut ax = [0.0; 3];
        a.matvec(&x, &mut ax);
        for i in 0..3 {
            assert_abs_diff_eq!(ax[i], b[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn lu_inverse_roundtrip() {
        let a = Mat::from_rows(2, 2, vec![4.0, 7.0, 2.0, 6.0]);
        let inv = LuFactors::factor(&a).unwrap().inverse();
        // A * A^-1 = I
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += a.at(i, k) * inv.at(k, j);
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(s, expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Mat::from_rows(2, 2, vec![1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(LuFactors::factor(&a), Err(Error::SingularMatrix)));
    }

    #[test]
    fn rank_one_update_matches_direct() {
        let mut m = Mat::identity(3);
        let u = [1.0, 2.0, 3.0];
        let v = [-1.0, 0.5, 2.0];
        m.rank_one_update(0.5, &u, &v);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 } + 0.5 * u[i] * v[j];
                assert_abs_diff_eq!(m.at(i, j), expect, epsilon = 1e-15);
            }
        }
    }
}
