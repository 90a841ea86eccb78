//! Hermitian eigendecomposition via the cyclic Jacobi method.
//!
//! Complex Jacobi rotations are quadratically convergent and unconditionally
//! stable for Hermitian input; on the tiny matrices used here (n ≤ 16) a
//! handful of sweeps reaches machine precision, and the accumulated rotations
//! give orthonormal eigenvectors directly — including in the heavily
//! degenerate zero-field configurations where Kramers doublets make the
//! spectrum pairwise equal.

use alloc::format;
use alloc::vec::Vec;

use crate::error::SimError;
use crate::fmath;
use crate::matrix::{c, CMat, C64, C_ONE};

/// Result of diagonalizing a Hermitian matrix.
///
/// `energies` are sorted ascending and `states` holds the matching
/// eigenvectors as columns, orthonormal, with each column's
/// largest-magnitude component rotated to be real and positive.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Real eigenvalues, ascending.
    pub energies: Vec<f64>,
    /// Eigenvector matrix; column `k` belongs to `energies[k]`.
    pub states: CMat,
}

impl EigenSystem {
    /// Dimension of the decomposed matrix.
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Eigenvector `k` as a vector.
    pub fn state(&self, k: usize) -> Vec<C64> {
        (0..self.states.rows()).map(|i| self.states[(i, k)]).collect()
    }

    /// Spectral norm of the decomposed matrix (largest |eigenvalue|).
    pub fn spectral_norm(&self) -> f64 {
        self.energies.iter().map(|e| fmath::abs(*e)).fold(0.0, f64::max)
    }
}

/// Relative Hermiticity tolerance accepted by [`eigh`].
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Diagonalize a Hermitian matrix.
///
/// Returns an error if the input is not square, not finite, or departs from
/// Hermiticity by more than `1e-12` relative to its largest entry.
pub fn eigh(h: &CMat) -> Result<EigenSystem, SimError> {
    if !h.is_square() {
        return Err(SimError::LinearAlgebra(format!(
            "eigendecomposition requires a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    if !h.is_finite() {
        return Err(SimError::LinearAlgebra(
            "matrix contains non-finite entries".into(),
        ));
    }
    let n = h.rows();
    let scale = h.max_abs();
    if h.hermiticity_defect() > HERMITICITY_TOL * scale.max(1.0) {
        return Err(SimError::LinearAlgebra(
            "matrix is not Hermitian within tolerance".into(),
        ));
    }

    let mut a = h.clone();
    // Force exact Hermiticity so rounding in the input cannot leak into the
    // rotations.
    for i in 0..n {
        a[(i, i)] = c(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()).scale(0.5);
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    let mut v = CMat::identity(n);

    let off_norm = |m: &CMat| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        fmath::sqrt(s)
    };

    let target = 1e-14 * scale.max(1e-300) * n as f64;
    const MAX_SWEEPS: usize = 60;
    let mut converged = off_norm(&a) <= target;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-18 * scale.max(1e-300) {
                    continue;
                }
                // Phase of the off-diagonal element, then a real rotation
                // angle chosen to annihilate it (|theta| <= pi/4).
                let w = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (app - aqq) / (2.0 * mag);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    let sign = if tau > 0.0 { 1.0 } else { -1.0 };
                    sign / (fmath::abs(tau) + fmath::sqrt(1.0 + tau * tau))
                };
                let cs = 1.0 / fmath::sqrt(1.0 + t * t);
                let sn = t * cs;
                let sw = w.scale(sn); // s·e^{i phi}
                let swc = sw.conj(); // s·e^{-i phi}

                // Rows/columns p and q of A (A <- U† A U with
                // U[p][p]=c, U[p][q]=-s·w, U[q][p]=s·w̄, U[q][q]=c).
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp.scale(cs) + akq * swc;
                    a[(k, q)] = akq.scale(cs) - akp * sw;
                    a[(p, k)] = a[(k, p)].conj();
                    a[(q, k)] = a[(k, q)].conj();
                }
                let app_new = app * cs * cs + 2.0 * cs * sn * mag + aqq * sn * sn;
                let aqq_new = app * sn * sn - 2.0 * cs * sn * mag + aqq * cs * cs;
                a[(p, p)] = c(app_new, 0.0);
                a[(q, q)] = c(aqq_new, 0.0);
                a[(p, q)] = c(0.0, 0.0);
                a[(q, p)] = c(0.0, 0.0);

                // Accumulate the rotation into the eigenvector matrix.
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp.scale(cs) + vkq * swc;
                    v[(k, q)] = vkq.scale(cs) - vkp * sw;
                }
            }
        }
        converged = off_norm(&a) <= target;
    }
    if !converged {
        return Err(SimError::LinearAlgebra(format!(
            "Jacobi eigensolver failed to converge in {MAX_SWEEPS} sweeps"
        )));
    }

    // Sort ascending, carrying eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let energies: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut states = CMat::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            states[(row, new_col)] = v[(row, old_col)];
        }
    }

    // Phase convention: rotate each column so its largest-magnitude
    // component is real and positive.
    for col in 0..n {
        let mut best_row = 0;
        let mut best_mag = 0.0;
        for row in 0..n {
            let mag = states[(row, col)].norm();
            if mag > best_mag {
                best_mag = mag;
                best_row = row;
            }
        }
        if best_mag > 0.0 {
            let phase = states[(best_row, col)] / best_mag;
            let fix = C_ONE / phase;
            for row in 0..n {
                states[(row, col)] = states[(row, col)] * fix;
            }
            // Kill the residual imaginary part introduced by rounding.
            let pivot = states[(best_row, col)];
            states[(best_row, col)] = c(pivot.norm(), 0.0);
        }
    }

    Ok(EigenSystem { energies, states })
}
