//! Single-phonon orbital relaxation rates.
//!
//! The upward (thermally activated) and downward rates between the orbital
//! branches of a manifold split by δ are
//!
//! ```text
//! γ+ = 2π·χρ·δ³ / (exp(ħδ/k_B·T) - 1)
//! γ- = 2π·χρ·δ³ · exp(-ħδ/k_B·T)        (as-written mode)
//! γ- = γ+ · exp(ħδ/k_B·T)               (detailed-balance mode)
//! ```
//!
//! where χρ bundles the deformation coupling and the phonon density-of-
//! states prefactor (units s², so 2π·χρ·δ³ is a rate). The as-written form
//! of γ- is kept as the default because it is what the source model states;
//! it lacks the spontaneous "+1" term and therefore violates detailed
//! balance (γ- < γ+, and γ- → 0 as T → 0). The detailed-balance mode
//! restores γ-/γ+ = exp(ħδ/k_B·T). Calibration against a measured T₁ is a
//! closed-form inversion, so round-trips are exact to rounding.

use alloc::vec::Vec;

use crate::constants::{HBAR, K_B, TWO_PI};
use crate::error::SimError;
use crate::fmath;

/// Which γ- convention to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum RateMode {
    /// Literal transcription of the source formulas (default).
    AsWritten,
    /// γ- = γ+·exp(ħδ/k_BT), the thermodynamically consistent variant.
    DetailedBalance,
}

/// Calibrated electron-phonon rate model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PhononModel {
    /// Combined coupling-density constant, s².
    pub chi_rho: f64,
    /// γ- convention.
    pub mode: RateMode,
    /// Optional low-frequency cutoff (rad/s): rates vanish for δ below it
    /// (coarse stand-in for a phonon gap). `None` disables the cutoff.
    pub cutoff: Option<f64>,
}

impl PhononModel {
    /// Model with a given coupling constant in the default (as-written)
    /// mode and no cutoff.
    pub fn new(chi_rho: f64) -> Result<Self, SimError> {
        if !(chi_rho > 0.0) || !chi_rho.is_finite() {
            return Err(SimError::InvalidParameter(
                "chi_rho must be positive and finite".into(),
            ));
        }
        Ok(PhononModel {
            chi_rho,
            mode: RateMode::AsWritten,
            cutoff: None,
        })
    }

    fn check_inputs(delta: f64, temp: f64) -> Result<(), SimError> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(SimError::InvalidParameter(
                "splitting delta must be positive and finite".into(),
            ));
        }
        if temp < 0.0 || !temp.is_finite() {
            return Err(SimError::InvalidParameter(
                "temperature must be non-negative and finite".into(),
            ));
        }
        Ok(())
    }

    fn gapped(&self, delta: f64) -> bool {
        matches!(self.cutoff, Some(cut) if delta < cut)
    }
}

/// Pair of phonon rates at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RatePair {
    /// Upward (thermally activated) rate, 1/s.
    pub gamma_plus: f64,
    /// Downward rate, 1/s.
    pub gamma_minus: f64,
}

impl RatePair {
    /// Total population relaxation rate γ+ + γ-.
    pub fn total(&self) -> f64 {
        self.gamma_plus + self.gamma_minus
    }
}

/// Upward rate γ+(δ, T). Returns exactly 0 at T = 0 (empty phonon bath).
pub fn gamma_plus(model: &PhononModel, delta: f64, temp: f64) -> Result<f64, SimError> {
    PhononModel::check_inputs(delta, temp)?;
    if model.gapped(delta) || temp == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * delta / (K_B * temp);
    Ok(TWO_PI * model.chi_rho * delta * delta * delta / fmath::expm1(x))
}

/// Downward rate γ-(δ, T) in the model's mode. In detailed-balance mode the
/// T = 0 limit is the spontaneous rate 2π·χρ·δ³; as written it vanishes.
pub fn gamma_minus(model: &PhononModel, delta: f64, temp: f64) -> Result<f64, SimError> {
    PhononModel::check_inputs(delta, temp)?;
    if model.gapped(delta) {
        return Ok(0.0);
    }
    let spontaneous = TWO_PI * model.chi_rho * delta * delta * delta;
    match model.mode {
        RateMode::AsWritten => {
            if temp == 0.0 {
                return Ok(0.0);
            }
            let x = HBAR * delta / (K_B * temp);
            Ok(spontaneous * fmath::exp(-x))
        }
        RateMode::DetailedBalance => {
            if temp == 0.0 {
                return Ok(spontaneous);
            }
            let x = HBAR * delta / (K_B * temp);
            // γ+·e^x = 2πχρδ³·e^x/(e^x - 1); stable as 1/(1 - e^{-x}).
            Ok(spontaneous / (-fmath::expm1(-x)))
        }
    }
}

/// Both rates at once.
pub fn rate_pair(model: &PhononModel, delta: f64, temp: f64) -> Result<RatePair, SimError> {
    Ok(RatePair {
        gamma_plus: gamma_plus(model, delta, temp)?,
        gamma_minus: gamma_minus(model, delta, temp)?,
    })
}

/// Orbital population relaxation time T₁ = 1/(γ+ + γ-).
///
/// Errors when both rates vanish (T = 0 in as-written mode, or below the
/// cutoff), where no finite T₁ exists.
pub fn orbital_t1(model: &PhononModel, delta: f64, temp: f64) -> Result<f64, SimError> {
    let rates = rate_pair(model, delta, temp)?;
    let total = rates.total();
    if total <= 0.0 {
        return Err(SimError::InvalidParameter(
            "phonon rates vanish here; T1 is unbounded".into(),
        ));
    }
    Ok(1.0 / total)
}

/// Sum γ+ + γ- at unit χρ — the closed-form kernel shared by
/// [`orbital_t1`] and [`calibrate`].
fn unit_rate_sum(mode: RateMode, delta: f64, temp: f64) -> f64 {
    let base = TWO_PI * delta * delta * delta;
    if temp == 0.0 {
        return match mode {
            RateMode::AsWritten => 0.0,
            RateMode::DetailedBalance => base,
        };
    }
    let x = HBAR * delta / (K_B * temp);
    match mode {
        RateMode::AsWritten => base * (1.0 / fmath::expm1(x) + fmath::exp(-x)),
        RateMode::DetailedBalance => base * (1.0 / fmath::expm1(x) + 1.0 / (-fmath::expm1(-x))),
    }
}

/// Solve for the χρ that reproduces a measured T₁ at one operating point.
pub fn calibrate(
    delta: f64,
    temp: f64,
    t1_measured: f64,
    mode: RateMode,
) -> Result<PhononModel, SimError> {
    PhononModel::check_inputs(delta, temp)?;
    if !(t1_measured > 0.0) || !t1_measured.is_finite() {
        return Err(SimError::InvalidParameter(
            "measured T1 must be positive and finite".into(),
        ));
    }
    let u = unit_rate_sum(mode, delta, temp);
    if u <= 0.0 {
        return Err(SimError::InvalidParameter(
            "rates vanish at this point; T1 carries no information about chi_rho".into(),
        ));
    }
    Ok(PhononModel {
        chi_rho: 1.0 / (t1_measured * u),
        mode,
        cutoff: None,
    })
}

/// Upper bound on the inhomogeneous coherence time: T₂* = 2·T₁.
pub fn coherence_bound(t1: f64) -> f64 {
    2.0 * t1
}

/// Sampled γ+(δ) profile at fixed temperature over `steps` points spanning
/// `[delta_lo, delta_hi]` (log-spaced endpoints included).
pub fn rate_vs_splitting_profile(
    model: &PhononModel,
    temp: f64,
    delta_lo: f64,
    delta_hi: f64,
    steps: usize,
) -> Result<Vec<(f64, f64)>, SimError> {
    if !(delta_lo > 0.0) || !(delta_hi > delta_lo) {
        return Err(SimError::InvalidParameter(
            "need 0 < delta_lo < delta_hi".into(),
        ));
    }
    if steps < 2 {
        return Err(SimError::InvalidParameter("need at least 2 samples".into()));
    }
    let log_lo = fmath::ln(delta_lo);
    let log_hi = fmath::ln(delta_hi);
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let f = k as f64 / (steps - 1) as f64;
        let delta = fmath::exp(log_lo + f * (log_hi - log_lo));
        out.push((delta, gamma_plus(model, delta, temp)?));
    }
    Ok(out)
}

/// Splitting that maximizes γ+ at fixed temperature, found by
/// golden-section search on `[delta_lo, delta_hi]`.
///
/// Analytically the maximum sits at ħδ/k_BT ≈ 2.8214 (the root of
/// 3·(1 - e^{-x}) = x), which the search reproduces; the bracket must
/// contain it.
pub fn peak_splitting(
    model: &PhononModel,
    temp: f64,
    delta_lo: f64,
    delta_hi: f64,
) -> Result<f64, SimError> {
    if !(temp > 0.0) {
        return Err(SimError::InvalidParameter(
            "peak search needs T > 0".into(),
        ));
    }
    if !(delta_lo > 0.0) || !(delta_hi > delta_lo) {
        return Err(SimError::InvalidParameter(
            "need 0 < delta_lo < delta_hi".into(),
        ));
    }
    let phi = (fmath::sqrt(5.0) - 1.0) / 2.0;
    let mut a = delta_lo;
    let mut b = delta_hi;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = gamma_plus(model, c, temp)?;
    let mut fd = gamma_plus(model, d, temp)?;
    for _ in 0..200 {
        if b - a <= 1e-12 * b {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = gamma_plus(model, c, temp)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = gamma_plus(model, d, temp)?;
        }
    }
    Ok(0.5 * (a + b))
}
