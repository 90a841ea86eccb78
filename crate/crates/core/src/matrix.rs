//! Dense complex matrices sized for few-level quantum problems.
//!
//! The systems treated here are at most 16-dimensional (Liouvillians up to
//! 256x256), so a straightforward row-major `Vec<Complex<f64>>` with O(n³)
//! kernels is both adequate and easy to audit. No BLAS, no panic-free
//! pretensions beyond index checks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::error::SimError;
use crate::fmath;

/// Double-precision complex scalar.
pub type C64 = Complex<f64>;

/// Shorthand constructor for a complex number.
#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// The complex zero.
pub const C_ZERO: C64 = Complex::new(0.0, 0.0);
/// The complex one.
pub const C_ONE: C64 = Complex::new(1.0, 0.0);
/// The imaginary unit.
pub const C_I: C64 = Complex::new(0.0, 1.0);

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    /// All-zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![C_ZERO; rows * cols],
        }
    }

    /// Identity matrix of dimension `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C_ONE;
        }
        m
    }

    /// Build a matrix entry-by-entry from a closure over (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Build from nested row slices; panics if the rows are ragged.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = CMat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged row {i}");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Diagonal matrix from real entries.
    pub fn diag_real(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = CMat::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = c(e, 0.0);
        }
        m
    }

    /// Number of rows.
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// True for square matrices.
    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Raw data in row-major order.
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// Sum of two matrices; panics on shape mismatch.
    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    /// Difference of two matrices; panics on shape mismatch.
    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    /// In-place `self += s * other`.
    pub fn add_scaled(&mut self, s: C64, other: &CMat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Matrix scaled by a complex factor.
    pub fn scale(&self, s: C64) -> CMat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    /// Matrix scaled by a real factor.
    pub fn scale_re(&self, s: f64) -> CMat {
        self.scale(c(s, 0.0))
    }

    /// Matrix product `self * other`; panics on inner-dimension mismatch.
    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C_ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product; panics on dimension mismatch.
    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![C_ZERO; self.rows];
        for i in 0..self.rows {
            let mut acc = C_ZERO;
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Trace; panics if not square.
    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        fmath::sqrt(self.data.iter().map(|z| z.norm_sqr()).sum())
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest magnitude of `self - self†`; zero for Hermitian matrices.
    pub fn hermiticity_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CMat) -> CMat {
        let mut out = CMat::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == C_ZERO {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// All entries finite?
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Numerical rank by row echelon reduction with partial pivoting.
    ///
    /// Rows whose pivot magnitude falls below `tol` (an absolute threshold;
    /// scale it from the matrix norm) are treated as zero.
    pub fn rank(&self, tol: f64) -> usize {
        let mut a = self.clone();
        let mut rank = 0;
        let mut pivot_row = 0;
        for col in 0..a.cols {
            // Find the largest remaining entry in this column.
            let mut best = pivot_row;
            let mut best_mag = 0.0;
            for r in pivot_row..a.rows {
                let mag = a[(r, col)].norm();
                if mag > best_mag {
                    best_mag = mag;
                    best = r;
                }
            }
            if best_mag <= tol {
                continue;
            }
            a.swap_rows(pivot_row, best);
            let inv = C_ONE / a[(pivot_row, col)];
            for r in (pivot_row + 1)..a.rows {
                let factor = a[(r, col)] * inv;
                if factor == C_ZERO {
                    continue;
                }
                for cc in col..a.cols {
                    let sub = factor * a[(pivot_row, cc)];
                    a[(r, cc)] -= sub;
                }
            }
            rank += 1;
            pivot_row += 1;
            if pivot_row == a.rows {
                break;
            }
        }
        rank
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for col in 0..self.cols {
            self.data.swap(i * self.cols + col, j * self.cols + col);
        }
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

/// Commutator `[a, b] = ab - ba`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.mul(b).sub(&b.mul(a))
}

/// Anticommutator `{a, b} = ab + ba`.
pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a.mul(b).add(&b.mul(a))
}

/// Solve the square linear system `a · x = b` by Gaussian elimination with
/// partial pivoting.
pub fn solve(a: &CMat, b: &[C64]) -> Result<Vec<C64>, SimError> {
    if !a.is_square() {
        return Err(SimError::LinearAlgebra(format!(
            "solve requires a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if b.len() != n {
        return Err(SimError::LinearAlgebra(format!(
            "right-hand side length {} does not match dimension {n}",
            b.len()
        )));
    }
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let scale = m.max_abs().max(1.0);
    for col in 0..n {
        let mut best = col;
        let mut best_mag = 0.0;
        for r in col..n {
            let mag = m[(r, col)].norm();
            if mag > best_mag {
                best_mag = mag;
                best = r;
            }
        }
        if best_mag <= 1e-14 * scale {
            return Err(SimError::LinearAlgebra(format!(
                "matrix is singular to working precision (pivot {col})"
            )));
        }
        m.swap_rows(col, best);
        rhs.swap(col, best);
        let inv = C_ONE / m[(col, col)];
        for r in (col + 1)..n {
            let factor = m[(r, col)] * inv;
            if factor == C_ZERO {
                continue;
            }
            for cc in col..n {
                let sub = factor * m[(col, cc)];
                m[(r, cc)] -= sub;
            }
            let sub = factor * rhs[col];
            rhs[r] -= sub;
        }
    }
    // Back substitution.
    let mut x = vec![C_ZERO; n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in (i + 1)..n {
            acc -= m[(i, j)] * x[j];
        }
        x[i] = acc / m[(i, i)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pauli_x() -> CMat {
        CMat::from_rows(&[&[C_ZERO, C_ONE], &[C_ONE, C_ZERO]])
    }

    fn pauli_z() -> CMat {
        CMat::diag_real(&[1.0, -1.0])
    }

    #[test]
    fn identity_is_neutral() {
        let a = CMat::from_fn(3, 3, |i, j| c((i + 2 * j) as f64, (i * j) as f64));
        let id = CMat::identity(3);
        assert_eq!(id.mul(&a), a);
        assert_eq!(a.mul(&id), a);
    }

    #[test]
    fn adjoint_of_product() {
        let a = CMat::from_fn(2, 2, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        let b = CMat::from_fn(2, 2, |i, j| c(j as f64, i as f64 * 2.0));
        let lhs = a.mul(&b).adjoint();
        let rhs = b.adjoint().mul(&a.adjoint());
        assert!(lhs.sub(&rhs).max_abs() < 1e-14);
    }

    #[test]
    fn kron_of_paulis() {
        // sigma_z ⊗ sigma_x has +sigma_x in the upper-left block and
        // -sigma_x in the lower-right block.
        let k = pauli_z().kron(&pauli_x());
        assert_eq!(k.rows(), 4);
        assert_eq!(k[(0, 1)], C_ONE);
        assert_eq!(k[(1, 0)], C_ONE);
        assert_eq!(k[(2, 3)], -C_ONE);
        assert_eq!(k[(3, 2)], -C_ONE);
        assert_eq!(k[(0, 2)], C_ZERO);
    }

    #[test]
    fn commutator_of_paulis() {
        // [sigma_z, sigma_x] = 2i sigma_y = [[0, 2], [-2, 0]].
        let comm = commutator(&pauli_z(), &pauli_x());
        assert!((comm[(0, 1)] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((comm[(1, 0)] - c(-2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = CMat::from_rows(&[
            &[c(4.0, 0.0), c(1.0, 1.0), c(0.0, -2.0)],
            &[c(1.0, -1.0), c(3.0, 0.0), c(0.5, 0.0)],
            &[c(0.0, 2.0), c(0.5, 0.0), c(5.0, 0.0)],
        ]);
        let x_true = [c(1.0, -2.0), c(0.0, 1.5), c(-3.0, 0.25)];
        let b = a.mul_vec(&x_true);
        let x = solve(&a, &b).unwrap();
        for (got, want) in x.iter().zip(&x_true) {
            assert!((got - want).norm() < 1e-12);
        }
    }

    #[test]
    fn solve_rejects_singular() {
        let a = CMat::from_rows(&[&[C_ONE, C_ONE], &[C_ONE, C_ONE]]);
        let b = [C_ONE, C_ZERO];
        assert!(matches!(solve(&a, &b), Err(SimError::LinearAlgebra(_))));
    }

    #[test]
    fn rank_detects_deficiency() {
        let full = CMat::identity(4);
        assert_eq!(full.rank(1e-12), 4);
        // Projector |v><v| has rank one.
        let v = [c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0), c(0.0, -0.5)];
        let proj = CMat::from_fn(4, 4, |i, j| v[i] * v[j].conj());
        assert_eq!(proj.rank(1e-12), 1);
    }

    proptest! {
        #[test]
        fn adjoint_is_involutive(seed in 0u64..1000) {
            let a = CMat::from_fn(4, 4, |i, j| {
                let t = (seed as f64) * 0.01 + (i * 7 + j * 3) as f64;
                c(t.sin(), t.cos())
            });
            let back = a.adjoint().adjoint();
            prop_assert!(a.sub(&back).max_abs() < 1e-15);
        }

        #[test]
        fn solve_residual_small(seed in 0u64..500) {
            // Diagonally dominant systems stay well conditioned.
            let n = 4;
            let a = CMat::from_fn(n, n, |i, j| {
                let t = seed as f64 * 0.37 + (i * n + j) as f64;
                let off = c(0.25 * t.sin(), 0.25 * t.cos());
                if i == j { off + c(3.0, 0.0) } else { off }
            });
            let b: alloc::vec::Vec<C64> =
                (0..n).map(|i| c(i as f64 - 1.0, 0.5 * i as f64)).collect();
            let x = solve(&a, &b).unwrap();
            let r = a.mul_vec(&x);
            for (ri, bi) in r.iter().zip(&b) {
                prop_assert!((ri - bi).norm() < 1e-10);
            }
        }
    }
}
