//! Lindblad master-equation engine for few-level systems.
//!
//! A [`LevelSystem`] bundles a rotating-frame static Hamiltonian, any number
//! of coherent drives (cw or pulsed, each with an optional Lorentzian laser
//! linewidth), and incoherent collapse channels. Evolution is by an adaptive
//! Dormand-Prince 5(4) Runge-Kutta on the full density matrix:
//!
//! ```text
//! dρ/dt = -i[H(t), ρ] + Σ_k r_k (L_k ρ L_k† - ½{L_k†L_k, ρ})
//! H(t)  = h0 + Σ_d (Ω_d·f_d(t)/2)·(e^{i(Δ_d t + φ_d)} C_d + h.c.)
//! ```
//!
//! No trace renormalization is applied anywhere: the generator is traceless,
//! so trace drift is a genuine accuracy diagnostic. Accepted states are
//! re-symmetrized (ρ ← (ρ+ρ†)/2), which touches only the anti-Hermitian
//! rounding noise.
//!
//! Dephasing conventions: a channel built by [`dephasing_channel`] with
//! `linewidth` γ (angular FWHM) damps the targeted coherence at γ/2 and so
//! broadens the associated line by exactly γ. A drive's `linewidth` field
//! inserts such a channel between the levels its coupling connects.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::SimError;
use crate::fft;
use crate::fmath;
use crate::matrix::{anticommutator, c, commutator, solve, CMat, C64, C_ONE, C_ZERO};

const LN2: f64 = core::f64::consts::LN_2;

/// Temporal envelope shapes for drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum PulseShape {
    /// Always-on drive; `width` is ignored.
    Constant,
    /// Unit top-hat of duration `width` centered on `t0`.
    Rectangular,
    /// exp(-2·ln2·|t-t0|/width): a two-sided exponential whose own FWHM is
    /// `width`.
    TwoSidedExponential,
    /// exp(-4·ln2·(t-t0)²/width²): Gaussian with FWHM `width`.
    Gaussian,
}

/// Drive envelope: a shape in [0, 1] times an overall `area_scale` factor.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PulseEnvelope {
    /// Shape family.
    pub shape: PulseShape,
    /// FWHM (or top-hat duration), seconds. Ignored for `Constant`.
    pub width: f64,
    /// Center of the pulse, seconds.
    pub t0: f64,
    /// Extra multiplier on the envelope; pulse-area sweeps scale this.
    pub area_scale: f64,
}

impl PulseEnvelope {
    /// Always-on envelope.
    pub const fn constant() -> Self {
        PulseEnvelope {
            shape: PulseShape::Constant,
            width: 0.0,
            t0: 0.0,
            area_scale: 1.0,
        }
    }

    /// Pulse of the given shape, FWHM and center.
    pub fn pulse(shape: PulseShape, width: f64, t0: f64) -> Self {
        PulseEnvelope {
            shape,
            width,
            t0,
            area_scale: 1.0,
        }
    }

    /// Envelope value at time `t` (shape value times `area_scale`).
    pub fn value(&self, t: f64) -> f64 {
        let shape = match self.shape {
            PulseShape::Constant => 1.0,
            PulseShape::Rectangular => {
                if fmath::abs(t - self.t0) <= 0.5 * self.width {
                    1.0
                } else {
                    0.0
                }
            }
            PulseShape::TwoSidedExponential => {
                fmath::exp(-2.0 * LN2 * fmath::abs(t - self.t0) / self.width)
            }
            PulseShape::Gaussian => {
                let u = (t - self.t0) / self.width;
                fmath::exp(-4.0 * LN2 * u * u)
            }
        };
        self.area_scale * shape
    }

    /// Time integral of the envelope (infinite for `Constant`).
    pub fn integral(&self) -> f64 {
        let shape_area = match self.shape {
            PulseShape::Constant => f64::INFINITY,
            PulseShape::Rectangular => self.width,
            PulseShape::TwoSidedExponential => self.width / LN2,
            PulseShape::Gaussian => self.width * fmath::sqrt(core::f64::consts::PI / (4.0 * LN2)),
        };
        self.area_scale * shape_area
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.shape != PulseShape::Constant && !(self.width > 0.0 && self.width.is_finite()) {
            return Err(SimError::InvalidParameter(
                "pulse width must be positive and finite".into(),
            ));
        }
        if !self.t0.is_finite() {
            return Err(SimError::InvalidParameter("pulse t0 must be finite".into()));
        }
        if !(self.area_scale >= 0.0) || !self.area_scale.is_finite() {
            return Err(SimError::InvalidParameter(
                "area_scale must be non-negative and finite".into(),
            ));
        }
        Ok(())
    }
}

/// One coherent drive term.
///
/// `coupling` is the one-sided transition pattern `C`; the engine adds the
/// Hermitian conjugate, so the drive Hamiltonian is
/// `(rabi·envelope(t)/2)·(e^{i(detuning·t + phase)}·C + h.c.)`.
#[derive(Debug, Clone)]
pub struct Drive {
    /// One-sided coupling pattern (dimensionless weights).
    pub coupling: CMat,
    /// Peak Rabi angular frequency, rad/s.
    pub rabi: f64,
    /// Rotating-frame detuning, rad/s.
    pub detuning: f64,
    /// Drive phase at t = 0, rad.
    pub phase: f64,
    /// Temporal envelope.
    pub envelope: PulseEnvelope,
    /// Lorentzian FWHM attributed to this laser, rad/s; enters as a
    /// dephasing channel on the driven coherence.
    pub linewidth: f64,
}

impl Drive {
    /// Continuous resonant drive with the given coupling pattern.
    pub fn cw(coupling: CMat, rabi: f64) -> Self {
        Drive {
            coupling,
            rabi,
            detuning: 0.0,
            phase: 0.0,
            envelope: PulseEnvelope::constant(),
            linewidth: 0.0,
        }
    }

    fn validate(&self, dim: usize) -> Result<(), SimError> {
        if self.coupling.rows() != dim || self.coupling.cols() != dim {
            return Err(SimError::InvalidParameter(format!(
                "drive coupling is {}x{}, system dimension is {dim}",
                self.coupling.rows(),
                self.coupling.cols()
            )));
        }
        if !self.coupling.is_finite() {
            return Err(SimError::InvalidParameter(
                "drive coupling has non-finite entries".into(),
            ));
        }
        if !(self.rabi >= 0.0) || !self.rabi.is_finite() {
            return Err(SimError::InvalidParameter(
                "drive rabi must be non-negative and finite".into(),
            ));
        }
        if !self.detuning.is_finite() || !self.phase.is_finite() {
            return Err(SimError::InvalidParameter(
                "drive detuning/phase must be finite".into(),
            ));
        }
        if !(self.linewidth >= 0.0) || !self.linewidth.is_finite() {
            return Err(SimError::InvalidParameter(
                "drive linewidth must be non-negative and finite".into(),
            ));
        }
        self.envelope.validate()
    }
}

/// One Lindblad collapse channel.
#[derive(Debug, Clone)]
pub struct CollapseChannel {
    /// Jump operator L (dimensionless pattern).
    pub op: CMat,
    /// Channel rate, 1/s.
    pub rate: f64,
    /// Whether quanta emitted through this channel count as detected
    /// fluorescence.
    pub radiative: bool,
}

impl CollapseChannel {
    /// Non-radiative channel.
    pub fn new(op: CMat, rate: f64) -> Self {
        CollapseChannel {
            op,
            rate,
            radiative: false,
        }
    }

    /// Radiative (detected) channel.
    pub fn radiative(op: CMat, rate: f64) -> Self {
        CollapseChannel {
            op,
            rate,
            radiative: true,
        }
    }

    fn validate(&self, dim: usize) -> Result<(), SimError> {
        if self.op.rows() != dim || self.op.cols() != dim {
            return Err(SimError::InvalidParameter(format!(
                "collapse operator is {}x{}, system dimension is {dim}",
                self.op.rows(),
                self.op.cols()
            )));
        }
        if !self.op.is_finite() {
            return Err(SimError::InvalidParameter(
                "collapse operator has non-finite entries".into(),
            ));
        }
        if !(self.rate >= 0.0) || !self.rate.is_finite() {
            return Err(SimError::InvalidParameter(
                "collapse rate must be non-negative and finite".into(),
            ));
        }
        Ok(())
    }
}

/// A complete Lindblad problem.
#[derive(Debug, Clone)]
pub struct LevelSystem {
    /// Static (rotating-frame) Hamiltonian, rad/s.
    pub h0: CMat,
    /// Coherent drives.
    pub drives: Vec<Drive>,
    /// Incoherent channels.
    pub channels: Vec<CollapseChannel>,
}

impl LevelSystem {
    /// System with only a static Hamiltonian.
    pub fn new(h0: CMat) -> Self {
        LevelSystem {
            h0,
            drives: Vec::new(),
            channels: Vec::new(),
        }
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.h0.rows()
    }

    /// Validate all parts against each other.
    pub fn validate(&self) -> Result<(), SimError> {
        if !self.h0.is_square() {
            return Err(SimError::InvalidParameter("h0 must be square".into()));
        }
        if !self.h0.is_finite() {
            return Err(SimError::InvalidParameter(
                "h0 has non-finite entries".into(),
            ));
        }
        let scale = self.h0.max_abs().max(1.0);
        if self.h0.hermiticity_defect() > 1e-12 * scale {
            return Err(SimError::InvalidParameter(
                "h0 is not Hermitian within tolerance".into(),
            ));
        }
        let dim = self.dim();
        for d in &self.drives {
            d.validate(dim)?;
        }
        for ch in &self.channels {
            ch.validate(dim)?;
        }
        Ok(())
    }

    /// All collapse channels, including the dephasing channels implied by
    /// drive linewidths.
    pub fn effective_channels(&self) -> Vec<CollapseChannel> {
        let mut out = self.channels.clone();
        let dim = self.dim();
        for d in &self.drives {
            if d.linewidth > 0.0 {
                let (uppers, lowers) = coupling_support(&d.coupling);
                out.push(dephasing_channel(dim, &uppers, &lowers, d.linewidth));
            }
        }
        out
    }
}

/// Row (upper) and column (lower) support of a coupling pattern.
fn coupling_support(coupling: &CMat) -> (Vec<usize>, Vec<usize>) {
    let mut uppers = Vec::new();
    let mut lowers = Vec::new();
    for i in 0..coupling.rows() {
        for j in 0..coupling.cols() {
            if coupling[(i, j)] != C_ZERO {
                if !uppers.contains(&i) {
                    uppers.push(i);
                }
                if !lowers.contains(&j) {
                    lowers.push(j);
                }
            }
        }
    }
    (uppers, lowers)
}

/// Basis matrix |i><j|.
pub fn basis_matrix(dim: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    m[(i, j)] = C_ONE;
    m
}

/// Projector |k><k|.
pub fn projector(dim: usize, k: usize) -> CMat {
    basis_matrix(dim, k, k)
}

/// Density matrix of the pure level |k>.
pub fn density_from_level(dim: usize, k: usize) -> CMat {
    projector(dim, k)
}

/// Real expectation value Re tr(O·ρ).
pub fn expectation(op: &CMat, rho: &CMat) -> f64 {
    op.mul(rho).trace().re
}

/// Pure-dephasing channel between two groups of levels.
///
/// The operator is (P_upper - P_lower)/√2 with rate `linewidth`/2, which
/// damps coherences between the groups at `linewidth`/2 — a Lorentzian of
/// FWHM `linewidth` on the corresponding line.
pub fn dephasing_channel(
    dim: usize,
    uppers: &[usize],
    lowers: &[usize],
    linewidth: f64,
) -> CollapseChannel {
    let mut op = CMat::zeros(dim, dim);
    let w = c(1.0 / fmath::sqrt(2.0), 0.0);
    for &u in uppers {
        op[(u, u)] = w;
    }
    for &l in lowers {
        op[(l, l)] = -w;
    }
    CollapseChannel::new(op, linewidth / 2.0)
}

/// Instantaneous Hamiltonian h0 + drive terms at time `t`.
pub fn hamiltonian_at(sys: &LevelSystem, t: f64) -> CMat {
    let mut h = sys.h0.clone();
    for d in &sys.drives {
        let amp = 0.5 * d.rabi * d.envelope.value(t);
        if amp == 0.0 {
            continue;
        }
        let ph = d.detuning * t + d.phase;
        let e = c(fmath::cos(ph), fmath::sin(ph));
        let mut term = d.coupling.scale(e);
        term = term.add(&term.adjoint());
        h.add_scaled(c(amp, 0.0), &term);
    }
    h
}

/// Right-hand side of the master equation at (ρ, t).
pub fn lindblad_rhs(sys: &LevelSystem, rho: &CMat, t: f64) -> Result<CMat, SimError> {
    sys.validate()?;
    let dim = sys.dim();
    if rho.rows() != dim || rho.cols() != dim {
        return Err(SimError::InvalidParameter(format!(
            "density matrix is {}x{}, system dimension is {dim}",
            rho.rows(),
            rho.cols()
        )));
    }
    let channels = sys.effective_channels();
    let prepared = prepare_channels(&channels);
    Ok(rhs_prepared(sys, &prepared, rho, t))
}

struct PreparedChannel {
    l: CMat,
    l_dag: CMat,
    l_dag_l: CMat,
    rate: f64,
    radiative: bool,
}

fn prepare_channels(channels: &[CollapseChannel]) -> Vec<PreparedChannel> {
    channels
        .iter()
        .filter(|ch| ch.rate > 0.0)
        .map(|ch| {
            let l_dag = ch.op.adjoint();
            PreparedChannel {
                l_dag_l: l_dag.mul(&ch.op),
                l: ch.op.clone(),
                l_dag,
                rate: ch.rate,
                radiative: ch.radiative,
            }
        })
        .collect()
}

fn rhs_prepared(sys: &LevelSystem, channels: &[PreparedChannel], rho: &CMat, t: f64) -> CMat {
    let h = hamiltonian_at(sys, t);
    let mut out = commutator(&h, rho).scale(c(0.0, -1.0));
    for ch in channels {
        let jump = ch.l.mul(rho).mul(&ch.l_dag);
        let anti = anticommutator(&ch.l_dag_l, rho);
        out.add_scaled(c(ch.rate, 0.0), &jump.sub(&anti.scale_re(0.5)));
    }
    out
}

/// Time-domain solution of a Lindblad problem.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Sample times, seconds.
    pub times: Vec<f64>,
    /// Density matrix at each sample.
    pub rho: Vec<CMat>,
    /// Level populations at each sample (`populations[k][i]` = level i at
    /// sample k).
    pub populations: Vec<Vec<f64>>,
    /// Detected emission rate Σ r_k·<L_k†L_k> over radiative channels, 1/s.
    pub fluorescence: Vec<f64>,
}

impl Trajectory {
    /// Population of one level over time.
    pub fn population_of(&self, level: usize) -> Vec<f64> {
        self.populations.iter().map(|p| p[level]).collect()
    }
}

/// Default integration tolerance (absolute and relative).
pub const DEFAULT_TOL: f64 = 1e-9;

/// Integrate the master equation, sampling at the given times.
///
/// `t_eval` must be strictly increasing with at least two points; the
/// integrator starts at `t_eval[0]` and clamps its adaptive steps so every
/// sample time is hit exactly. `tol` is used as both absolute and relative
/// tolerance (pass [`DEFAULT_TOL`] when unsure).
pub fn evolve(
    sys: &LevelSystem,
    rho0: &CMat,
    t_eval: &[f64],
    tol: f64,
) -> Result<Trajectory, SimError> {
    sys.validate()?;
    let dim = sys.dim();
    if rho0.rows() != dim || rho0.cols() != dim {
        return Err(SimError::InvalidParameter(
            "initial state dimension mismatch".into(),
        ));
    }
    if !rho0.is_finite() {
        return Err(SimError::InvalidParameter(
            "initial state has non-finite entries".into(),
        ));
    }
    if rho0.hermiticity_defect() > 1e-10 {
        return Err(SimError::InvalidParameter(
            "initial state is not Hermitian".into(),
        ));
    }
    if (rho0.trace().re - 1.0).abs() > 1e-9 {
        return Err(SimError::InvalidParameter(
            "initial state is not normalized".into(),
        ));
    }
    if t_eval.len() < 2 {
        return Err(SimError::InvalidParameter(
            "need at least two sample times".into(),
        ));
    }
    if t_eval.windows(2).any(|w| !(w[1] > w[0])) || t_eval.iter().any(|t| !t.is_finite()) {
        return Err(SimError::InvalidParameter(
            "sample times must be finite and strictly increasing".into(),
        ));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(SimError::InvalidParameter(
            "tolerance must be positive and finite".into(),
        ));
    }

    let channels = prepare_channels(&sys.effective_channels());
    let fluor_ops: Vec<(f64, CMat)> = channels
        .iter()
        .filter(|ch| ch.radiative)
        .map(|ch| (ch.rate, ch.l_dag_l.clone()))
        .collect();

    let span = t_eval[t_eval.len() - 1] - t_eval[0];
    let mut t = t_eval[0];
    let mut rho = rho0.clone();
    let mut h = span * 1e-4;
    let min_step = span * 1e-15;
    const MAX_STEPS: usize = 20_000_000;

    let mut traj = Trajectory {
        times: Vec::with_capacity(t_eval.len()),
        rho: Vec::with_capacity(t_eval.len()),
        populations: Vec::with_capacity(t_eval.len()),
        fluorescence: Vec::with_capacity(t_eval.len()),
    };
    let record = |traj: &mut Trajectory, t: f64, rho: &CMat| {
        traj.times.push(t);
        traj.populations
            .push((0..dim).map(|i| rho[(i, i)].re).collect());
        let fl: f64 = fluor_ops
            .iter()
            .map(|(rate, m)| rate * expectation(m, rho))
            .sum();
        traj.fluorescence.push(fl.max(0.0));
        traj.rho.push(rho.clone());
    };
    record(&mut traj, t, &rho);

    let mut next_sample = 1;
    let mut steps = 0usize;
    while next_sample < t_eval.len() {
        let target = t_eval[next_sample];
        // Clamp the step to land exactly on the next sample time.
        let mut h_try = h.min(target - t);
        loop {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(SimError::IntegrationFailure {
                    t_reached: t,
                    last_state: rho,
                    message: format!("step budget of {MAX_STEPS} exhausted"),
                });
            }
            match rk45_step(sys, &channels, &rho, t, h_try, tol) {
                StepOutcome::Accept {
                    rho_new,
                    err_ratio,
                } => {
                    t += h_try;
                    rho = rho_new;
                    // Grow the *adaptive* step estimate from the error of
                    // the accepted (possibly clamped) step.
                    let grow = if err_ratio > 0.0 {
                        (0.9 * fmath::powf(err_ratio, -0.2)).clamp(0.2, 5.0)
                    } else {
                        5.0
                    };
                    h = (h_try * grow).min(span);
                    break;
                }
                StepOutcome::Reject { err_ratio } => {
                    let shrink = if err_ratio.is_finite() && err_ratio > 0.0 {
                        (0.9 * fmath::powf(err_ratio, -0.2)).clamp(0.1, 0.9)
                    } else {
                        0.1
                    };
                    h_try *= shrink;
                    if h_try < min_step || !h_try.is_finite() {
                        return Err(SimError::IntegrationFailure {
                            t_reached: t,
                            last_state: rho,
                            message: String::from(
                                "step size underflow while controlling local error",
                            ),
                        });
                    }
                }
            }
        }
        if (t - target).abs() <= 1e-12 * span.max(1e-300) {
            t = target;
            record(&mut traj, t, &rho);
            next_sample += 1;
        }
    }
    Ok(traj)
}

enum StepOutcome {
    Accept { rho_new: CMat, err_ratio: f64 },
    Reject { err_ratio: f64 },
}

/// One Dormand-Prince 5(4) trial step.
fn rk45_step(
    sys: &LevelSystem,
    channels: &[PreparedChannel],
    rho: &CMat,
    t: f64,
    h: f64,
    tol: f64,
) -> StepOutcome {
    let f = |ti: f64, yi: &CMat| rhs_prepared(sys, channels, yi, ti);

    let k1 = f(t, rho);
    let mut y = rho.clone();
    y.add_scaled(c(h * (1.0 / 5.0), 0.0), &k1);
    let k2 = f(t + h / 5.0, &y);

    let mut y = rho.clone();
    y.add_scaled(c(h * (3.0 / 40.0), 0.0), &k1);
    y.add_scaled(c(h * (9.0 / 40.0), 0.0), &k2);
    let k3 = f(t + 3.0 * h / 10.0, &y);

    let mut y = rho.clone();
    y.add_scaled(c(h * (44.0 / 45.0), 0.0), &k1);
    y.add_scaled(c(h * (-56.0 / 15.0), 0.0), &k2);
    y.add_scaled(c(h * (32.0 / 9.0), 0.0), &k3);
    let k4 = f(t + 4.0 * h / 5.0, &y);

    let mut y = rho.clone();
    y.add_scaled(c(h * (19372.0 / 6561.0), 0.0), &k1);
    y.add_scaled(c(h * (-25360.0 / 2187.0), 0.0), &k2);
    y.add_scaled(c(h * (64448.0 / 6561.0), 0.0), &k3);
    y.add_scaled(c(h * (-212.0 / 729.0), 0.0), &k4);
    let k5 = f(t + 8.0 * h / 9.0, &y);

    let mut y = rho.clone();
    y.add_scaled(c(h * (9017.0 / 3168.0), 0.0), &k1);
    y.add_scaled(c(h * (-355.0 / 33.0), 0.0), &k2);
    y.add_scaled(c(h * (46732.0 / 5247.0), 0.0), &k3);
    y.add_scaled(c(h * (49.0 / 176.0), 0.0), &k4);
    y.add_scaled(c(h * (-5103.0 / 18656.0), 0.0), &k5);
    let k6 = f(t + h, &y);

    // 5th-order solution.
    let mut y5 = rho.clone();
    y5.add_scaled(c(h * (35.0 / 384.0), 0.0), &k1);
    y5.add_scaled(c(h * (500.0 / 1113.0), 0.0), &k3);
    y5.add_scaled(c(h * (125.0 / 192.0), 0.0), &k4);
    y5.add_scaled(c(h * (-2187.0 / 6784.0), 0.0), &k5);
    y5.add_scaled(c(h * (11.0 / 84.0), 0.0), &k6);

    let k7 = f(t + h, &y5);

    // Embedded error: (b5 - b4) weights.
    let mut err = CMat::zeros(rho.rows(), rho.cols());
    err.add_scaled(c(h * (71.0 / 57600.0), 0.0), &k1);
    err.add_scaled(c(h * (-71.0 / 16695.0), 0.0), &k3);
    err.add_scaled(c(h * (71.0 / 1920.0), 0.0), &k4);
    err.add_scaled(c(h * (-17253.0 / 339200.0), 0.0), &k5);
    err.add_scaled(c(h * (22.0 / 525.0), 0.0), &k6);
    err.add_scaled(c(h * (-1.0 / 40.0), 0.0), &k7);

    let mut ratio = 0.0f64;
    for i in 0..rho.rows() {
        for j in 0..rho.cols() {
            let scale = tol + tol * rho[(i, j)].norm().max(y5[(i, j)].norm());
            let r = err[(i, j)].norm() / scale;
            // A non-finite estimate (overflowed stage arithmetic) must
            // reject: NaN would otherwise slip through the comparison.
            if !r.is_finite() {
                return StepOutcome::Reject { err_ratio: f64::NAN };
            }
            if r > ratio {
                ratio = r;
            }
        }
    }
    if !y5.is_finite() {
        return StepOutcome::Reject { err_ratio: f64::NAN };
    }
    if ratio <= 1.0 {
        // Scrub anti-Hermitian rounding noise; the trace is untouched.
        let sym = y5.add(&y5.adjoint()).scale_re(0.5);
        StepOutcome::Accept {
            rho_new: sym,
            err_ratio: ratio,
        }
    } else {
        StepOutcome::Reject { err_ratio: ratio }
    }
}

/// Unique steady state of a time-independent Lindblad problem.
///
/// Drives must be constant-envelope and resonant in the chosen frame
/// (detuning 0); otherwise the generator is time dependent and no static
/// steady state exists. Fails with [`SimError::DegenerateSteadyState`] when
/// the Liouvillian kernel has more than one dimension.
pub fn steady_state(sys: &LevelSystem) -> Result<CMat, SimError> {
    sys.validate()?;
    for d in &sys.drives {
        if d.envelope.shape != PulseShape::Constant || d.detuning != 0.0 {
            return Err(SimError::InvalidParameter(
                "steady_state needs time-independent drives (constant envelope, zero detuning)"
                    .into(),
            ));
        }
    }
    let dim = sys.dim();
    let n2 = dim * dim;
    let channels = prepare_channels(&sys.effective_channels());

    // Column-by-column superoperator: L·vec(E_ij) for every basis matrix,
    // reusing the exact same right-hand side as the integrator.
    let mut sup = CMat::zeros(n2, n2);
    for j_col in 0..n2 {
        let (bi, bj) = (j_col / dim, j_col % dim);
        let col = rhs_prepared(sys, &channels, &basis_matrix(dim, bi, bj), 0.0);
        for r in 0..n2 {
            sup[(r, j_col)] = col[(r / dim, r % dim)];
        }
    }

    let scale = sup.max_abs().max(1e-300);
    let rank = sup.rank(1e-10 * scale * n2 as f64);
    let nullity = n2 - rank;
    if nullity != 1 {
        return Err(SimError::DegenerateSteadyState { nullity });
    }

    // Least-squares solve of [L; trace-row] x = [0; 1] via the normal
    // equations (L†L + t†t) x = t†.
    let mut normal = sup.adjoint().mul(&sup);
    // Scale the trace row comparably to the Liouvillian so the normal
    // matrix stays balanced.
    let w = scale;
    for i in 0..dim {
        for j in 0..dim {
            let r = i * dim + i;
            let s = j * dim + j;
            normal[(r, s)] += c(w * w, 0.0);
        }
    }
    let rhs: Vec<C64> = (0..n2)
        .map(|k| {
            if k / dim == k % dim {
                c(w * w, 0.0)
            } else {
                C_ZERO
            }
        })
        .collect();
    let x = solve(&normal, &rhs)?;
    let mut rho = CMat::from_fn(dim, dim, |i, j| x[i * dim + j]);
    rho = rho.add(&rho.adjoint()).scale_re(0.5);
    let tr = rho.trace().re;
    if !(tr.abs() > 1e-12) {
        return Err(SimError::LinearAlgebra(
            "steady-state solve returned a traceless matrix".into(),
        ));
    }
    rho = rho.scale_re(1.0 / tr);

    // Sanity: the result must actually annihilate the generator.
    let resid = rhs_prepared(sys, &channels, &rho, 0.0).max_abs();
    if resid > 1e-8 * scale {
        return Err(SimError::LinearAlgebra(format!(
            "steady-state residual {resid:.3e} too large for Liouvillian scale {scale:.3e}"
        )));
    }
    Ok(rho)
}

/// Effective two-level reduction of a far-detuned Λ (Raman) scheme.
///
/// For one-photon Rabi frequencies `omega_c`, `omega_d` and a shared
/// one-photon detuning `delta` (all rad/s, `|delta|` large against both),
/// the excited level can be eliminated. Returns the effective ground-pair
/// drive with two-photon Rabi frequency Ω_C·Ω_D/(2Δ), plus the AC-Stark
/// shifts [Ω_C²/(4Δ), Ω_D²/(4Δ)] that must be added to the two ground
/// levels of the reduced Hamiltonian — without them the two-photon
/// resonance sits at the wrong frequency.
///
/// The reduction degrades gracefully: at |Δ| ≳ 10·Ω it is accurate to a few
/// percent; validity is the caller's responsibility below that.
pub fn raman_effective(
    omega_c: f64,
    omega_d: f64,
    delta: f64,
) -> Result<(Drive, [f64; 2]), SimError> {
    for (name, v) in [("omega_c", omega_c), ("omega_d", omega_d)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(SimError::InvalidParameter(format!(
                "{name} must be non-negative and finite"
            )));
        }
    }
    if delta == 0.0 || !delta.is_finite() {
        return Err(SimError::InvalidParameter(
            "raman reduction needs a nonzero finite one-photon detuning".into(),
        ));
    }
    let rabi = omega_c * omega_d / (2.0 * delta);
    let stark = [
        omega_c * omega_c / (4.0 * delta),
        omega_d * omega_d / (4.0 * delta),
    ];
    let mut drive = Drive::cw(basis_matrix(2, 1, 0), fmath::abs(rabi));
    if rabi < 0.0 {
        // Fold the sign into the drive phase.
        drive.phase = core::f64::consts::PI;
    }
    Ok((drive, stark))
}

/// Which scalar signal of a trajectory to transform.
#[derive(Debug, Clone)]
pub enum TraceObservable<'a> {
    /// Population of one level.
    Population(usize),
    /// The detected-fluorescence signal.
    Fluorescence,
    /// Re tr(O·ρ) for an arbitrary operator.
    Operator(&'a CMat),
}

/// Magnitude spectrum of a trajectory observable.
///
/// The trajectory must be sampled on a uniform grid (non-uniform grids are
/// linearly resampled onto one). The signal is truncated to the largest
/// power-of-two length, transformed, and the non-negative-frequency half is
/// returned as (frequencies in Hz, magnitudes). No detrending is applied;
/// bin 0 is the DC term.
pub fn spectrum_of_trace(
    traj: &Trajectory,
    observable: TraceObservable<'_>,
) -> Result<(Vec<f64>, Vec<f64>), SimError> {
    let n_raw = traj.times.len();
    if n_raw < 4 {
        return Err(SimError::InvalidParameter(
            "need at least 4 samples for a spectrum".into(),
        ));
    }
    let signal_at = |k: usize| -> f64 {
        match &observable {
            TraceObservable::Population(level) => traj.populations[k][*level],
            TraceObservable::Fluorescence => traj.fluorescence[k],
            TraceObservable::Operator(op) => expectation(op, &traj.rho[k]),
        }
    };
    let span = traj.times[n_raw - 1] - traj.times[0];
    let dt_nominal = span / (n_raw - 1) as f64;
    let uniform = traj
        .times
        .windows(2)
        .all(|w| (w[1] - w[0] - dt_nominal).abs() <= 1e-6 * dt_nominal);

    let mut signal: Vec<f64> = if uniform {
        (0..n_raw).map(signal_at).collect()
    } else {
        // Linear resample onto a uniform grid of the same length.
        let mut out = Vec::with_capacity(n_raw);
        let mut seg = 0usize;
        for k in 0..n_raw {
            let t = traj.times[0] + dt_nominal * k as f64;
            while seg + 2 < n_raw && traj.times[seg + 1] < t {
                seg += 1;
            }
            let (t0, t1) = (traj.times[seg], traj.times[seg + 1]);
            let f = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            out.push(signal_at(seg) * (1.0 - f) + signal_at(seg + 1) * f);
        }
        out
    };

    let n = 1usize << (usize::BITS - 1 - signal.len().leading_zeros());
    signal.truncate(n);
    let mut buf: Vec<C64> = signal.iter().map(|&v| c(v, 0.0)).collect();
    fft::fft_in_place(&mut buf)?;
    let half = n / 2;
    let freqs: Vec<f64> = (0..half).map(|k| k as f64 / (n as f64 * dt_nominal)).collect();
    let mags: Vec<f64> = buf[..half].iter().map(|z| z.norm()).collect();
    Ok((freqs, mags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::eigh;
    use crate::matrix::c;
    use proptest::prelude::*;

    fn two_level_drive(rabi: f64) -> LevelSystem {
        let mut sys = LevelSystem::new(CMat::zeros(2, 2));
        sys.drives.push(Drive::cw(basis_matrix(2, 1, 0), rabi));
        sys
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn rhs_without_channels_is_a_commutator() {
        let h0 = CMat::diag_real(&[0.0, 2.0e9]);
        let sys = LevelSystem::new(h0.clone());
        let mut rho = CMat::zeros(2, 2);
        rho[(0, 0)] = c(0.5, 0.0);
        rho[(1, 1)] = c(0.5, 0.0);
        rho[(0, 1)] = c(0.3, 0.1);
        rho[(1, 0)] = c(0.3, -0.1);
        let rhs = lindblad_rhs(&sys, &rho, 0.0).unwrap();
        let want = commutator(&h0, &rho).scale(c(0.0, -1.0));
        assert!(rhs.sub(&want).max_abs() < 1e-12 * want.max_abs());
        assert!(rhs.trace().norm() < 1e-12 * rhs.max_abs().max(1.0));
    }

    #[test]
    fn rhs_of_pure_decay_moves_population_at_rate_gamma() {
        let gamma = 5.4e8;
        let mut sys = LevelSystem::new(CMat::zeros(2, 2));
        sys.channels
            .push(CollapseChannel::radiative(basis_matrix(2, 0, 1), gamma));
        let rho = density_from_level(2, 1);
        let rhs = lindblad_rhs(&sys, &rho, 0.0).unwrap();
        assert!((rhs[(1, 1)].re + gamma).abs() < 1e-6);
        assert!((rhs[(0, 0)].re - gamma).abs() < 1e-6);
    }

    #[test]
    fn resonant_rabi_matches_closed_form() {
        let rabi = crate::constants::TWO_PI * 20e6;
        let sys = two_level_drive(rabi);
        let t_end = 3.0 / (rabi / crate::constants::TWO_PI);
        let times = linspace(0.0, t_end, 61);
        let traj = evolve(&sys, &density_from_level(2, 0), &times, DEFAULT_TOL).unwrap();
        for (k, t) in traj.times.iter().enumerate() {
            let want = (0.5 * rabi * t).sin().powi(2);
            assert!(
                (traj.populations[k][1] - want).abs() < 1e-6,
                "t = {t}: {} vs {want}",
                traj.populations[k][1]
            );
        }
    }

    #[test]
    fn undriven_decay_matches_exponential() {
        let gamma = 1.0 / 1.85e-9;
        let mut sys = LevelSystem::new(CMat::zeros(2, 2));
        sys.channels
            .push(CollapseChannel::radiative(basis_matrix(2, 0, 1), gamma));
        let times = linspace(0.0, 10e-9, 41);
        let traj = evolve(&sys, &density_from_level(2, 1), &times, DEFAULT_TOL).unwrap();
        for (k, t) in traj.times.iter().enumerate() {
            let want = (-gamma * t).exp();
            assert!((traj.populations[k][1] - want).abs() < 1e-6);
            // Fluorescence is rate times excited population.
            assert!((traj.fluorescence[k] - gamma * want).abs() < 1e-2 * gamma);
        }
    }

    #[test]
    fn driven_damped_matches_fixed_step_reference() {
        let rabi = crate::constants::TWO_PI * 50e6;
        let gamma = 2.0e8;
        let mut sys = two_level_drive(rabi);
        sys.drives[0].detuning = 0.0;
        sys.channels
            .push(CollapseChannel::radiative(basis_matrix(2, 0, 1), gamma));
        let t_end = 60e-9;
        let times = linspace(0.0, t_end, 31);
        let traj = evolve(&sys, &density_from_level(2, 0), &times, 1e-10).unwrap();

        // Plain fixed-step RK4 at a very fine step as an independent
        // reference; far finer than the fastest timescale in the problem.
        let channels = prepare_channels(&sys.effective_channels());
        let n_steps = 600_000usize;
        let h = t_end / n_steps as f64;
        let mut rho = density_from_level(2, 0);
        let mut t = 0.0;
        let mut k_sample = 0usize;
        let mut max_err = 0.0f64;
        for step in 0..=n_steps {
            if k_sample < times.len() && (t - times[k_sample]).abs() < h / 2.0 {
                let err = (rho[(1, 1)].re - traj.populations[k_sample][1]).abs();
                max_err = max_err.max(err);
                k_sample += 1;
            }
            if step == n_steps {
                break;
            }
            let k1 = rhs_prepared(&sys, &channels, &rho, t);
            let mut y = rho.clone();
            y.add_scaled(c(h / 2.0, 0.0), &k1);
            let k2 = rhs_prepared(&sys, &channels, &y, t + h / 2.0);
            let mut y = rho.clone();
            y.add_scaled(c(h / 2.0, 0.0), &k2);
            let k3 = rhs_prepared(&sys, &channels, &y, t + h / 2.0);
            let mut y = rho.clone();
            y.add_scaled(c(h, 0.0), &k3);
            let k4 = rhs_prepared(&sys, &channels, &y, t + h);
            rho.add_scaled(c(h / 6.0, 0.0), &k1);
            rho.add_scaled(c(h / 3.0, 0.0), &k2);
            rho.add_scaled(c(h / 3.0, 0.0), &k3);
            rho.add_scaled(c(h / 6.0, 0.0), &k4);
            t += h;
        }
        assert_eq!(k_sample, times.len());
        assert!(max_err < 1e-6, "max deviation {max_err}");
    }

    #[test]
    fn trajectory_invariants_hold_on_a_messy_system() {
        // Three levels, two drives (one pulsed, one detuned), decay, and
        // dephasing all at once.
        let mut sys = LevelSystem::new(CMat::diag_real(&[0.0, 1.0e8, 3.0e9]));
        let mut d1 = Drive::cw(basis_matrix(3, 2, 0), crate::constants::TWO_PI * 40e6);
        d1.linewidth = crate::constants::TWO_PI * 1e6;
        sys.drives.push(d1);
        let mut d2 = Drive::cw(basis_matrix(3, 2, 1), crate::constants::TWO_PI * 25e6);
        d2.detuning = crate::constants::TWO_PI * 10e6;
        d2.envelope = PulseEnvelope::pulse(PulseShape::Gaussian, 40e-9, 60e-9);
        sys.drives.push(d2);
        sys.channels
            .push(CollapseChannel::radiative(basis_matrix(3, 0, 2), 4.0e8));
        sys.channels
            .push(CollapseChannel::radiative(basis_matrix(3, 1, 2), 1.4e8));
        let times = linspace(0.0, 150e-9, 76);
        let mut rho0 = CMat::zeros(3, 3);
        rho0[(0, 0)] = c(0.6, 0.0);
        rho0[(1, 1)] = c(0.4, 0.0);
        let traj = evolve(&sys, &rho0, &times, DEFAULT_TOL).unwrap();
        for (k, rho) in traj.rho.iter().enumerate() {
            assert!((rho.trace().re - 1.0).abs() < 1e-9, "trace at step {k}");
            assert!(rho.hermiticity_defect() < 1e-10);
            let es = eigh(rho).unwrap();
            assert!(es.energies[0] > -1e-7, "negative eigenvalue {}", es.energies[0]);
            assert!(traj.fluorescence[k] >= 0.0);
        }
    }

    #[test]
    fn evolution_is_linear_in_the_initial_state() {
        let mut sys = two_level_drive(crate::constants::TWO_PI * 30e6);
        sys.channels
            .push(CollapseChannel::new(basis_matrix(2, 0, 1), 1.0e8));
        let times = linspace(0.0, 40e-9, 21);
        let a = 0.3;
        let rho1 = density_from_level(2, 0);
        let rho2 = density_from_level(2, 1);
        let mut mix = rho1.scale_re(a);
        mix.add_scaled(c(1.0 - a, 0.0), &rho2);
        let t1 = evolve(&sys, &rho1, &times, 1e-10).unwrap();
        let t2 = evolve(&sys, &rho2, &times, 1e-10).unwrap();
        let tm = evolve(&sys, &mix, &times, 1e-10).unwrap();
        for k in 0..times.len() {
            let mut combo = t1.rho[k].scale_re(a);
            combo.add_scaled(c(1.0 - a, 0.0), &t2.rho[k]);
            assert!(combo.sub(&tm.rho[k]).max_abs() < 1e-8);
        }
    }

    #[test]
    fn frame_shift_leaves_populations_invariant() {
        let delta = crate::constants::TWO_PI * 15e6;
        let rabi = crate::constants::TWO_PI * 40e6;
        // Frame A: detuning carried by the drive phase.
        let mut sys_a = two_level_drive(rabi);
        sys_a.drives[0].detuning = delta;
        // Frame B: detuning folded into h0.
        let mut sys_b = two_level_drive(rabi);
        let mut h0 = CMat::zeros(2, 2);
        h0[(1, 1)] = c(-delta, 0.0);
        sys_b.h0 = h0;
        let times = linspace(0.0, 80e-9, 41);
        let ta = evolve(&sys_a, &density_from_level(2, 0), &times, 1e-10).unwrap();
        let tb = evolve(&sys_b, &density_from_level(2, 0), &times, 1e-10).unwrap();
        for k in 0..times.len() {
            for lvl in 0..2 {
                assert!(
                    (ta.populations[k][lvl] - tb.populations[k][lvl]).abs() < 1e-8,
                    "level {lvl} at sample {k}"
                );
            }
        }
    }

    #[test]
    fn integration_failure_carries_last_state() {
        // An absurd Rabi frequency overflows the stage arithmetic, so the
        // controller shrinks the step into underflow and reports failure.
        let sys = two_level_drive(1e300);
        let times = linspace(0.0, 1.0, 3);
        match evolve(&sys, &density_from_level(2, 0), &times, 1e-9) {
            Err(SimError::IntegrationFailure {
                t_reached,
                last_state,
                ..
            }) => {
                assert!(t_reached >= 0.0);
                assert_eq!(last_state.rows(), 2);
            }
            other => panic!("expected integration failure, got {other:?}"),
        }
    }

    #[test]
    fn steady_state_of_pure_decay_is_the_ground_state() {
        let mut sys = LevelSystem::new(CMat::zeros(2, 2));
        sys.channels
            .push(CollapseChannel::radiative(basis_matrix(2, 0, 1), 3.0e8));
        let rho = steady_state(&sys).unwrap();
        assert!((rho[(0, 0)].re - 1.0).abs() < 1e-10);
        assert!(rho[(1, 1)].norm() < 1e-10);
    }

    #[test]
    fn dark_state_is_the_unique_cpt_steady_state() {
        // Λ-system, both legs resonant, equal Rabi: the dark state
        // (|0> - |1>)/√2 decouples and collects all population.
        let rabi = crate::constants::TWO_PI * 10e6;
        let gamma = 1.0 / 1.85e-9;
        let mut sys = LevelSystem::new(CMat::zeros(3, 3));
        sys.drives.push(Drive::cw(basis_matrix(3, 2, 0), rabi));
        sys.drives.push(Drive::cw(basis_matrix(3, 2, 1), rabi));
        sys.channels
            .push(CollapseChannel::radiative(basis_matrix(3, 0, 2), gamma / 2.0));
        sys.channels
            .push(CollapseChannel::radiative(basis_matrix(3, 1, 2), gamma / 2.0));
        let rho = steady_state(&sys).unwrap();
        // Dark-state projector expectation = 1, excited population = 0.
        let mut dark = CMat::zeros(3, 3);
        dark[(0, 0)] = c(0.5, 0.0);
        dark[(1, 1)] = c(0.5, 0.0);
        dark[(0, 1)] = c(-0.5, 0.0);
        dark[(1, 0)] = c(-0.5, 0.0);
        let overlap = expectation(&dark, &rho);
        assert!((overlap - 1.0).abs() < 1e-8, "dark population {overlap}");
        assert!(rho[(2, 2)].re < 1e-9);
        // And the fluorescence there is zero: rate·population of |2>.
        let resid = lindblad_rhs(&sys, &rho, 0.0).unwrap().max_abs();
        assert!(resid < 1e-9 * gamma);
    }

    #[test]
    fn undriven_multi_ground_manifold_is_degenerate() {
        let mut sys = LevelSystem::new(CMat::zeros(3, 3));
        sys.channels
            .push(CollapseChannel::radiative(basis_matrix(3, 0, 2), 1e8));
        match steady_state(&sys) {
            Err(SimError::DegenerateSteadyState { nullity }) => assert!(nullity >= 2),
            other => panic!("expected degenerate steady state, got {other:?}"),
        }
    }

    #[test]
    fn steady_state_matches_long_time_evolution() {
        // CPT with finite ground dephasing: no pure dark state survives, so
        // the steady state is mixed; compare against a long evolve().
        let rabi = crate::constants::TWO_PI * 12e6;
        let gamma = 1.0 / 1.85e-9;
        let mut sys = LevelSystem::new(CMat::zeros(3, 3));
        sys.drives.push(Drive::cw(basis_matrix(3, 2, 0), rabi));
        sys.drives.push(Drive::cw(basis_matrix(3, 2, 1), rabi));
        sys.channels
            .push(CollapseChannel::radiative(basis_matrix(3, 0, 2), gamma / 2.0));
        sys.channels
            .push(CollapseChannel::radiative(basis_matrix(3, 1, 2), gamma / 2.0));
        sys.channels.push(dephasing_channel(
            3,
            &[0],
            &[1],
            crate::constants::TWO_PI * 3.5e6,
        ));
        let rho_ss = steady_state(&sys).unwrap();
        let times = linspace(0.0, 4e-6, 9);
        let traj = evolve(&sys, &density_from_level(3, 0), &times, 1e-10).unwrap();
        let rho_end = &traj.rho[traj.rho.len() - 1];
        assert!(rho_end.sub(&rho_ss).max_abs() < 1e-6);
    }

    #[test]
    fn raman_reduction_formulas() {
        let tp = crate::constants::TWO_PI;
        let (drive, stark) = raman_effective(tp * 10e9, tp * 10e9, tp * 500e9).unwrap();
        assert!((drive.rabi - tp * 0.1e9).abs() < 1e-3);
        assert!((stark[0] - tp * 10e9 * 10e9 / (4.0 * 500e9)).abs() < 1e-3);
        let (zero, _) = raman_effective(0.0, tp * 10e9, tp * 500e9).unwrap();
        assert_eq!(zero.rabi, 0.0);
        assert!(raman_effective(tp * 1e9, tp * 1e9, 0.0).is_err());
    }

    #[test]
    fn raman_reduction_matches_full_lambda_system() {
        // Full 3-level Λ in the two-photon frame vs the reduced 2-level
        // model, Δ/Ω = 50; ground transfer should agree to 5%.
        let tp = crate::constants::TWO_PI;
        let omega = tp * 1e9;
        let delta = 50.0 * omega;
        let mut full = LevelSystem::new(CMat::diag_real(&[0.0, 0.0, delta]));
        full.drives.push(Drive::cw(basis_matrix(3, 2, 0), omega));
        full.drives.push(Drive::cw(basis_matrix(3, 2, 1), omega));

        let (drive, stark) = raman_effective(omega, omega, delta).unwrap();
        let omega_eff = drive.rabi;
        let mut reduced = LevelSystem::new(CMat::diag_real(&[stark[0], stark[1]]));
        reduced.drives.push(drive);

        // Evolve for half a two-photon cycle: full transfer in the ideal
        // reduced model.
        let t_pi = core::f64::consts::PI / omega_eff;
        let times = linspace(0.0, t_pi, 41);
        let t_full = evolve(&full, &density_from_level(3, 0), &times, 1e-10).unwrap();
        let t_red = evolve(&reduced, &density_from_level(2, 0), &times, 1e-10).unwrap();
        for k in (0..times.len()).step_by(5) {
            let err =
                (t_full.populations[k][1] - t_red.populations[k][1]).abs();
            assert!(err < 0.05, "transfer mismatch {err} at sample {k}");
        }
    }

    #[test]
    fn spectrum_finds_a_pure_tone() {
        // Synthesize a trajectory whose level-0 population oscillates at an
        // exact bin frequency.
        let n = 128;
        let dt = 1e-9;
        let f0 = 5.0 / (n as f64 * dt);
        let mut traj = Trajectory {
            times: Vec::new(),
            rho: Vec::new(),
            populations: Vec::new(),
            fluorescence: Vec::new(),
        };
        for k in 0..n {
            let t = k as f64 * dt;
            let p = 0.5 + 0.5 * (crate::constants::TWO_PI * f0 * t).cos();
            traj.times.push(t);
            traj.populations.push(vec![p, 1.0 - p]);
            traj.fluorescence.push(0.0);
            traj.rho.push(CMat::diag_real(&[p, 1.0 - p]));
        }
        let (freqs, mags) = spectrum_of_trace(&traj, TraceObservable::Population(0)).unwrap();
        let (peak_idx, _) = mags
            .iter()
            .enumerate()
            .skip(1)
            .fold((0, 0.0), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
        assert!((freqs[peak_idx] - f0).abs() < 0.5 / (n as f64 * dt));
    }

    #[test]
    fn spectrum_of_driven_two_level_peaks_at_generalized_rabi() {
        let tp = crate::constants::TWO_PI;
        let rabi = tp * 80e6;
        let delta = tp * 60e6;
        let mut sys = two_level_drive(rabi);
        sys.h0[(1, 1)] = c(-delta, 0.0);
        let gamma = 2e6;
        sys.channels
            .push(CollapseChannel::radiative(basis_matrix(2, 0, 1), gamma));
        let n = 512;
        let t_end = 2.0e-6;
        let times = linspace(0.0, t_end, n + 1);
        let traj = evolve(&sys, &density_from_level(2, 0), &times, 1e-10).unwrap();
        let (freqs, mags) = spectrum_of_trace(&traj, TraceObservable::Population(1)).unwrap();
        let (peak_idx, _) = mags
            .iter()
            .enumerate()
            .skip(3)
            .fold((0, 0.0), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
        let want = (rabi * rabi + delta * delta).sqrt() / tp;
        let bin = freqs[1] - freqs[0];
        assert!(
            (freqs[peak_idx] - want).abs() <= bin,
            "peak at {} vs generalized Rabi {want}",
            freqs[peak_idx]
        );
    }

    #[test]
    fn envelopes_have_documented_widths_and_areas() {
        let tse = PulseEnvelope::pulse(PulseShape::TwoSidedExponential, 12e-12, 0.0);
        assert!((tse.value(6e-12) - 0.5).abs() < 1e-12);
        assert!((tse.value(-6e-12) - 0.5).abs() < 1e-12);
        let gauss = PulseEnvelope::pulse(PulseShape::Gaussian, 10e-9, 5e-9);
        assert!((gauss.value(0.0) - 0.5).abs() < 1e-12);
        assert!((gauss.value(10e-9) - 0.5).abs() < 1e-12);
        // Quadrature check of the analytic areas.
        for env in [tse, gauss] {
            let (lo, hi) = (env.t0 - 20.0 * env.width, env.t0 + 20.0 * env.width);
            let n = 200_001;
            let h = (hi - lo) / (n - 1) as f64;
            let mut area = 0.0;
            for k in 0..n {
                let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                area += w * env.value(lo + k as f64 * h);
            }
            area *= h;
            assert!(
                (area - env.integral()).abs() < 1e-6 * env.integral(),
                "area {area} vs {}",
                env.integral()
            );
        }
        let rect = PulseEnvelope::pulse(PulseShape::Rectangular, 3e-9, 0.0);
        assert_eq!(rect.value(1.4e-9), 1.0);
        assert_eq!(rect.value(1.6e-9), 0.0);
        assert_eq!(rect.integral(), 3e-9);
    }

    proptest! {
        #[test]
        fn rhs_is_traceless_and_hermiticity_preserving(seed in 0u64..300) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let dim = rng.gen_range(2usize..5);
            let b = CMat::from_fn(dim, dim, |_, _| {
                c(rng.gen_range(-1e9..1e9), rng.gen_range(-1e9..1e9))
            });
            let h0 = b.add(&b.adjoint()).scale_re(0.5);
            let mut sys = LevelSystem::new(h0);
            for _ in 0..rng.gen_range(0usize..3) {
                sys.channels.push(CollapseChannel::new(
                    CMat::from_fn(dim, dim, |_, _| {
                        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    }),
                    rng.gen_range(0.0..1e9),
                ));
            }
            // Random Hermitian PSD-ish state: v v† mixtures, normalized.
            let v = CMat::from_fn(dim, dim, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let mut rho = v.mul(&v.adjoint());
            let tr = rho.trace().re;
            rho = rho.scale_re(1.0 / tr);
            let rhs = lindblad_rhs(&sys, &rho, 0.0).unwrap();
            let scale = rhs.max_abs().max(1.0);
            prop_assert!(rhs.trace().norm() < 1e-12 * scale * dim as f64);
            prop_assert!(rhs.hermiticity_defect() < 1e-11 * scale);
        }
    }
}
