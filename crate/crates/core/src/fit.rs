//! Damped least-squares (Levenberg-Marquardt) curve fitting.
//!
//! Three model families cover every observable extracted by the protocol
//! runners: exponential relaxation, sums of Lorentzians, and damped
//! sinusoids. Initial guesses are deterministic, data-derived heuristics
//! (FFT peak for frequencies, half-crossing widths for lines); callers can
//! always override them.
//!
//! The engine uses central-difference Jacobians and reports 1-sigma
//! parameter uncertainties from the scaled inverse normal matrix,
//! cov = (JᵀJ)⁻¹·s² with s² the reduced chi-square.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::SimError;
use crate::fft;
use crate::fmath;
use crate::matrix::{c, solve, CMat, C64};

/// Model family a [`FitResult`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum FitModel {
    /// `A·exp(-x/tau) + C`, parameters `[A, tau, C]`.
    Exponential,
    /// `C + Σ_k A_k·(w_k/2)² / ((x-x0_k)² + (w_k/2)²)`, parameters
    /// `[C, A_1, x0_1, w_1, A_2, x0_2, w_2, ...]`.
    LorentzianSum,
    /// `A·exp(-x/tau)·cos(2π·f·x + phi) + C`, parameters
    /// `[A, tau, f, phi, C]`.
    DampedSinusoid,
}

/// Converged fit: best parameters with 1-sigma uncertainties.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FitResult {
    /// Which model family was fitted.
    pub model: FitModel,
    /// Best-fit parameters in the layout documented on [`FitModel`].
    pub params: Vec<f64>,
    /// 1-sigma uncertainties per parameter (infinite when the normal
    /// matrix is singular at the optimum).
    pub uncertainties: Vec<f64>,
    /// Euclidean norm of the residual vector at the optimum.
    pub residual_norm: f64,
    /// Levenberg-Marquardt iterations spent.
    pub iterations: usize,
}

impl FitResult {
    /// Value of the fitted model at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        model_eval(self.model, &self.params, x)
    }
}

fn model_eval(model: FitModel, p: &[f64], x: f64) -> f64 {
    match model {
        FitModel::Exponential => p[0] * fmath::exp(-x / p[1]) + p[2],
        FitModel::LorentzianSum => {
            let mut y = p[0];
            for peak in p[1..].chunks_exact(3) {
                let (a, x0, w) = (peak[0], peak[1], peak[2]);
                let hw2 = 0.25 * w * w;
                y += a * hw2 / ((x - x0) * (x - x0) + hw2);
            }
            y
        }
        FitModel::DampedSinusoid => {
            p[0] * fmath::exp(-x / p[1])
                * fmath::cos(crate::constants::TWO_PI * p[2] * x + p[3])
                + p[4]
        }
    }
}

fn validate_data(xs: &[f64], ys: &[f64], n_params: usize) -> Result<(), SimError> {
    if xs.len() != ys.len() {
        return Err(SimError::InvalidParameter(
            "x and y arrays differ in length".into(),
        ));
    }
    if xs.len() <= n_params {
        return Err(SimError::FitFailure(format!(
            "{} points cannot constrain {n_params} parameters",
            xs.len()
        )));
    }
    if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
        return Err(SimError::InvalidParameter(
            "fit data contains non-finite values".into(),
        ));
    }
    Ok(())
}

/// Core damped least-squares loop over an arbitrary scalar model.
///
/// `scales[j]` is the characteristic magnitude of parameter `j`, used for
/// finite-difference steps and the convergence test; it must be positive.
fn lm_fit(
    model: FitModel,
    xs: &[f64],
    ys: &[f64],
    p0: &[f64],
    scales: &[f64],
) -> Result<FitResult, SimError> {
    let m = p0.len();
    let n = xs.len();
    validate_data(xs, ys, m)?;
    if scales.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(SimError::InvalidParameter(
            "parameter scales must be positive".into(),
        ));
    }
    if p0.iter().any(|v| !v.is_finite()) {
        return Err(SimError::FitFailure("non-finite initial guess".into()));
    }

    let residuals = |p: &[f64]| -> Vec<f64> {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| model_eval(model, p, x) - y)
            .collect()
    };
    let chi2_of = |r: &[f64]| -> f64 { r.iter().map(|v| v * v).sum() };

    let mut p = p0.to_vec();
    let mut r = residuals(&p);
    let mut chi2 = chi2_of(&r);
    if !chi2.is_finite() {
        return Err(SimError::FitFailure(
            "initial guess produces non-finite residuals".into(),
        ));
    }

    let mut lambda = 1e-3;
    let mut iterations = 0usize;
    const MAX_ITER: usize = 200;
    const DIFF: f64 = 6.0e-6; // ~cbrt(f64 epsilon)

    let jacobian = |p: &[f64]| -> Vec<Vec<f64>> {
        let mut cols = Vec::with_capacity(m);
        for j in 0..m {
            let h = DIFF * fmath::abs(p[j]).max(scales[j] * DIFF);
            let mut hi = p.to_vec();
            hi[j] += h;
            let mut lo = p.to_vec();
            lo[j] -= h;
            cols.push(
                xs.iter()
                    .map(|&x| (model_eval(model, &hi, x) - model_eval(model, &lo, x)) / (2.0 * h))
                    .collect(),
            );
        }
        cols
    };

    // Work in column-scaled parameter space u_j = p_j / scales_j so the
    // normal matrix stays well conditioned even when raw parameters differ
    // by many orders of magnitude (Hz vs seconds vs dimensionless).
    let scaled_normal = |p: &[f64]| -> (CMat, Vec<Vec<f64>>) {
        let jcols = jacobian(p);
        let mut a = CMat::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let dot: f64 = jcols[i].iter().zip(&jcols[j]).map(|(u, v)| u * v).sum();
                let scaled = dot * scales[i] * scales[j];
                a[(i, j)] = c(scaled, 0.0);
                a[(j, i)] = c(scaled, 0.0);
            }
        }
        (a, jcols)
    };

    let mut stalled = 0usize;
    while iterations < MAX_ITER {
        iterations += 1;
        let (a, jcols) = scaled_normal(&p);
        let mut g = vec![C64::new(0.0, 0.0); m];
        for i in 0..m {
            let dot: f64 = jcols[i].iter().zip(&r).map(|(u, v)| u * v).sum();
            g[i] = c(-dot * scales[i], 0.0);
        }

        let max_diag = (0..m).fold(f64::MIN_POSITIVE, |acc, j| acc.max(a[(j, j)].re));
        let mut improved = false;
        for _ in 0..40 {
            let mut damped = a.clone();
            for j in 0..m {
                let d = a[(j, j)].re;
                damped[(j, j)] = c(d + lambda * d.max(1e-10 * max_diag), 0.0);
            }
            let step = match solve(&damped, &g) {
                Ok(s) => s,
                Err(_) => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let p_new: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(j, v)| v + step[j].re * scales[j])
                .collect();
            let r_new = residuals(&p_new);
            let chi2_new = chi2_of(&r_new);
            if chi2_new.is_finite() && chi2_new <= chi2 {
                let rel_drop = (chi2 - chi2_new) / chi2.max(1e-300);
                let small_step = (0..m).all(|j| step[j].re.abs() <= 1e-12);
                p = p_new;
                r = r_new;
                chi2 = chi2_new;
                lambda = (lambda / 3.0).max(1e-14);
                improved = true;
                if small_step || rel_drop < 1e-14 {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                break;
            }
        }
        if !improved {
            // Cannot reduce chi-square any further in any damping regime.
            break;
        }
        if stalled >= 2 {
            break;
        }
    }

    // Covariance of the optimum in scaled space, mapped back:
    // cov(p) = S·(J̃ᵀJ̃)⁻¹·S · s².
    let (a, _) = scaled_normal(&p);
    let s2 = if n > m {
        chi2 / (n - m) as f64
    } else {
        0.0
    };
    let mut uncertainties = vec![f64::INFINITY; m];
    let mut cov_ok = true;
    let mut cov_cols = Vec::with_capacity(m);
    for j in 0..m {
        let mut e = vec![C64::new(0.0, 0.0); m];
        e[j] = c(1.0, 0.0);
        match solve(&a, &e) {
            Ok(col) => cov_cols.push(col),
            Err(_) => {
                cov_ok = false;
                break;
            }
        }
    }
    if cov_ok {
        for j in 0..m {
            let var = cov_cols[j][j].re * s2 * scales[j] * scales[j];
            uncertainties[j] = fmath::sqrt(var.max(0.0));
        }
    }

    Ok(FitResult {
        model,
        params: p,
        uncertainties,
        residual_norm: fmath::sqrt(chi2),
        iterations,
    })
}

/// Fit `A·exp(-x/tau) + C`.
///
/// `guess` overrides the heuristic `[A, tau, C]` start (tail value for `C`,
/// initial deviation for `A`, a third of the span for `tau`).
pub fn fit_exponential(xs: &[f64], ys: &[f64], guess: Option<&[f64]>) -> Result<FitResult, SimError> {
    validate_data(xs, ys, 3)?;
    let span = xs[xs.len() - 1] - xs[0];
    if !(span > 0.0) {
        return Err(SimError::InvalidParameter(
            "x axis must span a positive range".into(),
        ));
    }
    let (p0, explicit) = match guess {
        Some(g) if g.len() == 3 => (g.to_vec(), true),
        Some(_) => {
            return Err(SimError::InvalidParameter(
                "exponential guess must have 3 parameters".into(),
            ))
        }
        None => {
            let c0 = ys[ys.len() - 1];
            let a0 = ys[0] - c0;
            (vec![a0, span / 3.0, c0], false)
        }
    };
    let y_scale = ys
        .iter()
        .fold(0.0f64, |acc, v| acc.max(fmath::abs(*v)))
        .max(1e-30);
    let scales = vec![y_scale, span, y_scale];
    let mut best = lm_fit(FitModel::Exponential, xs, ys, &p0, &scales)?;
    if !explicit {
        // The span/3 start can sit in a shallow basin; retry from a faster
        // and a slower decay and keep the best chi-square.
        for factor in [0.1, 3.0] {
            let alt = vec![p0[0], span * factor / 3.0, p0[2]];
            if let Ok(res) = lm_fit(FitModel::Exponential, xs, ys, &alt, &scales) {
                if res.residual_norm < best.residual_norm {
                    best = res;
                }
            }
        }
    }
    if best.params[1] < 0.0 {
        return Err(SimError::FitFailure(format!(
            "exponential fit converged to negative time constant {:.3e}",
            best.params[1]
        )));
    }
    Ok(best)
}

/// Fit `C + Σ_k A_k·(w_k/2)²/((x-x0_k)² + (w_k/2)²)`.
///
/// The number of peaks is `(guess.len() - 1) / 3` when a guess is given;
/// with `None` a single peak is seeded at the largest deviation from the
/// edge baseline, with a half-crossing width estimate.
pub fn fit_lorentzian_sum(
    xs: &[f64],
    ys: &[f64],
    guess: Option<&[f64]>,
) -> Result<FitResult, SimError> {
    let p0: Vec<f64> = match guess {
        Some(g) => {
            if g.len() < 4 || (g.len() - 1) % 3 != 0 {
                return Err(SimError::InvalidParameter(
                    "lorentzian guess must have 1 + 3k parameters".into(),
                ));
            }
            g.to_vec()
        }
        None => {
            validate_data(xs, ys, 4)?;
            let base = 0.5 * (ys[0] + ys[ys.len() - 1]);
            let (idx, _) = ys
                .iter()
                .enumerate()
                .fold((0usize, 0.0f64), |acc, (i, &y)| {
                    let dev = fmath::abs(y - base);
                    if dev > acc.1 {
                        (i, dev)
                    } else {
                        acc
                    }
                });
            let a0 = ys[idx] - base;
            // Half-crossing width scan outwards from the extremum.
            let half = base + 0.5 * a0;
            let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
                for i in range {
                    if (ys[i] - half) * (a0.signum()) < 0.0 {
                        return Some(xs[i]);
                    }
                }
                None
            };
            let span = xs[xs.len() - 1] - xs[0];
            let right = cross(&mut (idx..xs.len())).unwrap_or(xs[idx] + span / 8.0);
            let left = cross(&mut (0..idx).rev()).unwrap_or(xs[idx] - span / 8.0);
            let w0 = (right - left).abs().max(span / xs.len() as f64);
            vec![base, a0, xs[idx], w0]
        }
    };
    validate_data(xs, ys, p0.len())?;
    let span = (xs[xs.len() - 1] - xs[0]).abs().max(1e-30);
    let y_scale = ys
        .iter()
        .fold(0.0f64, |acc, v| acc.max(fmath::abs(*v)))
        .max(1e-30);
    let mut scales = vec![y_scale];
    for _ in p0[1..].chunks_exact(3) {
        scales.extend_from_slice(&[y_scale, span, span]);
    }
    let mut res = lm_fit(FitModel::LorentzianSum, xs, ys, &p0, &scales)?;
    // Width sign is a gauge freedom; report FWHMs as positive.
    for peak in res.params[1..].chunks_exact_mut(3) {
        peak[2] = fmath::abs(peak[2]);
    }
    Ok(res)
}

/// Fit `A·exp(-x/tau)·cos(2π·f·x + phi) + C`.
///
/// With `None` the frequency and phase are seeded from the largest
/// non-DC FFT bin of the mean-removed signal (requires a uniform x grid for
/// the seed to be meaningful), the amplitude from the data range, and the
/// decay time from the span.
pub fn fit_damped_sinusoid(
    xs: &[f64],
    ys: &[f64],
    guess: Option<&[f64]>,
) -> Result<FitResult, SimError> {
    validate_data(xs, ys, 5)?;
    let span = xs[xs.len() - 1] - xs[0];
    if !(span > 0.0) {
        return Err(SimError::InvalidParameter(
            "x axis must span a positive range".into(),
        ));
    }
    let p0: Vec<f64> = match guess {
        Some(g) if g.len() == 5 => g.to_vec(),
        Some(_) => {
            return Err(SimError::InvalidParameter(
                "damped sinusoid guess must have 5 parameters".into(),
            ))
        }
        None => {
            let n = xs.len();
            let mean = ys.iter().sum::<f64>() / n as f64;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &y in ys {
                lo = lo.min(y);
                hi = hi.max(y);
            }
            // FFT seed on the largest power-of-two prefix.
            let nfft = 1usize << (usize::BITS - 1 - n.leading_zeros());
            let mut buf: Vec<C64> = ys[..nfft].iter().map(|&y| c(y - mean, 0.0)).collect();
            fft::fft_in_place(&mut buf)?;
            let dt = span / (n - 1) as f64;
            let (kpk, _) = buf[1..nfft / 2]
                .iter()
                .enumerate()
                .fold((1usize, 0.0f64), |acc, (i, z)| {
                    let m = z.norm();
                    if m > acc.1 {
                        (i + 1, m)
                    } else {
                        acc
                    }
                });
            // Three-point parabolic refinement of the peak bin keeps the
            // seed within the fit's convergence basin for short records.
            let shift = if kpk >= 2 && kpk + 1 < nfft / 2 {
                let (ml, mc, mr) = (
                    buf[kpk - 1].norm_sqr(),
                    buf[kpk].norm_sqr(),
                    buf[kpk + 1].norm_sqr(),
                );
                let denom = ml - 2.0 * mc + mr;
                if denom.abs() > 1e-300 {
                    (0.5 * (ml - mr) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            } else {
                0.0
            };
            let f0 = (kpk as f64 + shift) / (nfft as f64 * dt);
            let phi0 = {
                let z = buf[kpk];
                fmath::atan2(z.im, z.re) - crate::constants::TWO_PI * f0 * xs[0]
            };
            vec![0.5 * (hi - lo), span, f0, phi0, mean]
        }
    };
    let y_scale = ys
        .iter()
        .fold(0.0f64, |acc, v| acc.max(fmath::abs(*v)))
        .max(1e-30);
    let f_scale = fmath::abs(p0[2]).max(1.0 / span);
    let scales = vec![y_scale, span, f_scale, 1.0, y_scale];
    let mut res = lm_fit(FitModel::DampedSinusoid, xs, ys, &p0, &scales)?;
    // Canonical gauge: positive amplitude and frequency, phase in (-pi, pi].
    if res.params[2] < 0.0 {
        res.params[2] = -res.params[2];
        res.params[3] = -res.params[3];
    }
    if res.params[0] < 0.0 {
        res.params[0] = -res.params[0];
        res.params[3] += core::f64::consts::PI;
    }
    let tp = crate::constants::TWO_PI;
    res.params[3] -= tp * fmath::round(res.params[3] / tp);
    Ok(res)
}
