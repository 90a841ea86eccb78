//! Measurement protocol runners.
//!
//! Each runner assembles a [`LevelSystem`](crate::dynamics::LevelSystem) for
//! one experiment, integrates the master equation (or solves for the steady
//! state), and reduces the trace to the handful of numbers the experiment
//! reports: a relaxation time, a dip width, a line splitting, a fringe
//! frequency. Runners take a config struct whose `Default` is the reference
//! operating point, return the raw sweep alongside the fit, and are fully
//! deterministic: sweep grids are fixed by the config and the fits start
//! from closed-form or FFT-based seeds.
//!
//! Conventions shared by all runners:
//!
//! * Angular frequencies (`rabi`, detunings, splittings, linewidths) are in
//!   rad/s; reported fit outputs (`*_hz` fields) are plain Hz.
//! * Several drives address eigenstate pairs through a unit-weight coupling
//!   pattern, so the configured `rabi` *is* the on-resonance Rabi frequency.
//!   Calibrating laboratory field amplitudes against transition matrix
//!   elements is out of scope.
//! * Relaxation between manifold eigenstates is built by
//!   [`relaxation_channels`]: one jump channel per eigenstate pair, weighted
//!   by the squared matrix element of the orbital coupling operator and the
//!   phonon rate at that pair's actual splitting (a secular approximation;
//!   populations and coherences then decouple in the eigenbasis).

use alloc::vec::Vec;
use alloc::{format, vec};

use crate::constants::TWO_PI;
use crate::dynamics::{
    basis_matrix, density_from_level, dephasing_channel, evolve, expectation, spectrum_of_trace,
    steady_state, CollapseChannel, Drive, LevelSystem, PulseEnvelope, PulseShape, TraceObservable,
    DEFAULT_TOL,
};
use crate::eigen::EigenSystem;
use crate::error::SimError;
use crate::fmath;
use crate::matrix::{c, CMat, C_ONE, C_ZERO};
use crate::phonon::{self, PhononModel, RateMode};
use crate::spectrum::{
    build_ground_hamiltonian, eigensystem, MagneticField, SivParameters, SIV_AXIS,
};

pub use crate::fit::{
    fit_damped_sinusoid, fit_exponential, fit_lorentzian_sum, FitModel, FitResult,
};

/// Radiative decay rate of the reference emitter, 1/s.
const GAMMA_RAD_REF: f64 = 1.0 / 1.85e-9;

/// `n` evenly spaced samples covering `[a, b]` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (b - a) / (n - 1) as f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(a + step * i as f64);
    }
    out[n - 1] = b;
    out
}

/// Trapezoidal integral of sampled data restricted to `[a, b]`.
///
/// Only segments fully inside the window contribute; runners construct
/// their sample grids so the window edges coincide with samples.
fn window_integral(times: &[f64], values: &[f64], a: f64, b: f64) -> f64 {
    let mut acc = 0.0;
    for i in 1..times.len() {
        let (t0, t1) = (times[i - 1], times[i]);
        if t0 >= a - 1e-18 && t1 <= b + 1e-18 {
            acc += 0.5 * (values[i] + values[i - 1]) * (t1 - t0);
        }
    }
    acc
}

/// Detected emission rate Σ r·<L†L> of a state under a system's radiative
/// channels.
fn fluorescence_rate(sys: &LevelSystem, rho: &CMat) -> f64 {
    let mut rate = 0.0;
    for ch in sys.effective_channels() {
        if ch.radiative && ch.rate > 0.0 {
            rate += ch.rate * expectation(&ch.op.adjoint().mul(&ch.op), rho);
        }
    }
    rate.max(0.0)
}

fn pauli_x2() -> CMat {
    CMat::from_rows(&[&[C_ZERO, C_ONE], &[C_ONE, C_ZERO]])
}

fn pauli_z2() -> CMat {
    CMat::diag_real(&[1.0, -1.0])
}

/// Orbital coupling operator σx ⊗ 1_spin (⊗ 1_nuc): the operator through
/// which the phonon bath exchanges orbital quanta.
fn orbital_x_op(nuclear: bool) -> CMat {
    let base = pauli_x2().kron(&CMat::identity(2));
    if nuclear {
        base.kron(&CMat::identity(2))
    } else {
        base
    }
}

/// Spin projection S_z (along the symmetry axis): 1_orb ⊗ σz/2 (⊗ 1_nuc).
fn spin_z_op(nuclear: bool) -> CMat {
    let base = CMat::identity(2).kron(&pauli_z2()).scale_re(0.5);
    if nuclear {
        base.kron(&CMat::identity(2))
    } else {
        base
    }
}

/// Nuclear projection I_z: 1_orb ⊗ 1_spin ⊗ σz/2.
fn nuclear_z_op() -> CMat {
    CMat::identity(4).kron(&pauli_z2()).scale_re(0.5)
}

/// Diagonal expectation values <k|op|k> over the eigenbasis.
fn eigen_diagonal(es: &EigenSystem, op: &CMat) -> Vec<f64> {
    let m = es.states.adjoint().mul(op).mul(&es.states);
    (0..es.dim()).map(|k| m[(k, k)].re).collect()
}

/// Pairs below this splitting are treated as degenerate and get no phonon
/// channel (the Ohmic-cubed rates vanish there anyway).
const GAP_FLOOR: f64 = TWO_PI * 1e6;

/// One-phonon relaxation channels between manifold eigenstates.
///
/// For every eigenstate pair (i, j) with `E_j - E_i` above [`GAP_FLOOR`],
/// a downward channel `|i><j|` at `γ-(gap)·|<i|coupling|j>|²` and an upward
/// channel `|j><i|` at `γ+(gap)` times the same weight are emitted. The
/// channels live in the eigenbasis: use them with `h0 = diag(energies)`.
pub fn relaxation_channels(
    es: &EigenSystem,
    coupling: &CMat,
    model: &PhononModel,
    temperature: f64,
) -> Result<Vec<CollapseChannel>, SimError> {
    let dim = es.dim();
    if coupling.rows() != dim || coupling.cols() != dim {
        return Err(SimError::InvalidParameter(format!(
            "coupling operator is {}x{}, eigensystem dimension is {dim}",
            coupling.rows(),
            coupling.cols()
        )));
    }
    let m = es.states.adjoint().mul(coupling).mul(&es.states);
    let mut channels = Vec::new();
    for i in 0..dim {
        for j in (i + 1)..dim {
            let gap = es.energies[j] - es.energies[i];
            if gap < GAP_FLOOR {
                continue;
            }
            let weight = m[(i, j)].norm_sqr();
            if weight < 1e-12 {
                continue;
            }
            let rates = phonon::rate_pair(model, gap, temperature)?;
            if rates.gamma_minus > 0.0 {
                channels.push(CollapseChannel::new(
                    basis_matrix(dim, i, j),
                    rates.gamma_minus * weight,
                ));
            }
            if rates.gamma_plus > 0.0 {
                channels.push(CollapseChannel::new(
                    basis_matrix(dim, j, i),
                    rates.gamma_plus * weight,
                ));
            }
        }
    }
    Ok(channels)
}

/// Reject sweeps whose response never rises above numerical noise before
/// handing them to a fitter.
fn reject_flat(ys: &[f64], what: &str) -> Result<(), SimError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut scale: f64 = 0.0;
    for &y in ys {
        lo = lo.min(y);
        hi = hi.max(y);
        scale = scale.max(fmath::abs(y));
    }
    // The threshold sits well above integrator round-off but far below any
    // physical contrast.
    if hi - lo <= 1e-4 * scale.max(1e-300) {
        return Err(SimError::FitFailure(format!(
            "{what} is flat over the sweep; nothing to fit"
        )));
    }
    Ok(())
}

fn check_positive(value: f64, name: &str) -> Result<(), SimError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(SimError::InvalidParameter(format!(
            "{name} must be positive and finite"
        )));
    }
    Ok(())
}

fn check_grid(grid: &[f64], name: &str) -> Result<(), SimError> {
    if grid.len() < 4 {
        return Err(SimError::InvalidParameter(format!(
            "{name} needs at least 4 points"
        )));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|x| !x.is_finite()) {
        return Err(SimError::InvalidParameter(format!(
            "{name} must be finite and strictly increasing"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Two-pulse optical pumping: orbital T1
// ---------------------------------------------------------------------------

/// Two-pulse optical pumping sequence on the lowest-frequency optical line.
///
/// A resonant pulse empties the upper orbital branch of the ground state
/// through optical pumping; after a variable dark delay a second, identical
/// pulse reads out how much population the phonon bath has returned. The
/// fluorescence integrated over the rising edge of the readout pulse
/// recovers exponentially with the orbital relaxation time 1/(γ+ + γ-).
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OpticalPumpingConfig {
    /// Calibrated phonon model for the ground-state orbital doublet.
    pub phonon: PhononModel,
    /// Sample temperature, K.
    pub temperature: f64,
    /// Ground-state orbital splitting, rad/s.
    pub orbital_splitting: f64,
    /// Radiative decay rate of the excited level, 1/s.
    pub gamma_rad: f64,
    /// Peak Rabi frequency of the pump/readout pulses, rad/s.
    pub rabi: f64,
    /// Duration of each rectangular pulse, s.
    pub pulse_duration: f64,
    /// Fluorescence integration window at the start of the readout pulse, s.
    pub readout_window: f64,
    /// Dark delays between the two pulses, s.
    pub delays: Vec<f64>,
    /// Integrator tolerance.
    pub tol: f64,
}

impl Default for OpticalPumpingConfig {
    fn default() -> Self {
        let splitting = TWO_PI * 48e9;
        OpticalPumpingConfig {
            phonon: phonon::calibrate(splitting, 5.0, 39e-9, RateMode::AsWritten)
                .expect("reference calibration point is well-posed"),
            temperature: 5.0,
            orbital_splitting: splitting,
            gamma_rad: GAMMA_RAD_REF,
            rabi: TWO_PI * 150e6,
            pulse_duration: 30e-9,
            readout_window: 2e-9,
            // Start past the radiative afterglow of the pump pulse
            // (several excited-state lifetimes) so the recovery is a clean
            // single exponential.
            delays: linspace(12e-9, 212e-9, 34),
            tol: DEFAULT_TOL,
        }
    }
}

impl OpticalPumpingConfig {
    fn validate(&self) -> Result<(), SimError> {
        if self.temperature < 0.0 || !self.temperature.is_finite() {
            return Err(SimError::InvalidParameter(
                "temperature must be non-negative and finite".into(),
            ));
        }
        check_positive(self.orbital_splitting, "orbital_splitting")?;
        check_positive(self.gamma_rad, "gamma_rad")?;
        check_positive(self.rabi, "rabi")?;
        check_positive(self.pulse_duration, "pulse_duration")?;
        check_positive(self.readout_window, "readout_window")?;
        if self.readout_window > self.pulse_duration {
            return Err(SimError::InvalidParameter(
                "readout_window must not exceed pulse_duration".into(),
            ));
        }
        check_grid(&self.delays, "delays")?;
        if self.delays[0] <= 0.0 {
            return Err(SimError::InvalidParameter(
                "delays must be positive (the pulses may not overlap)".into(),
            ));
        }
        check_positive(self.tol, "tol")
    }
}

/// Outcome of [`run_optical_pumping_t1`].
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OpticalPumpingResult {
    /// Dark delays, s.
    pub delays: Vec<f64>,
    /// Rising-edge fluorescence integral of the readout pulse (photon
    /// counts per shot, up to the collection efficiency).
    pub signal: Vec<f64>,
    /// Exponential fit of `signal` vs delay.
    pub fit: FitResult,
    /// Fitted orbital relaxation time, s.
    pub t1: f64,
}

/// Run the two-pulse optical pumping sequence and fit the recovery.
///
/// Levels: 0 = lower orbital branch, 1 = upper orbital branch (pumped),
/// 2 = excited state. The drive frame is chosen so the driven transition is
/// resonant; level energies are dropped because every coherence to an
/// undriven level stays zero throughout the sequence.
pub fn run_optical_pumping_t1(
    cfg: &OpticalPumpingConfig,
) -> Result<OpticalPumpingResult, SimError> {
    cfg.validate()?;
    let rates = phonon::rate_pair(&cfg.phonon, cfg.orbital_splitting, cfg.temperature)?;
    let total = rates.total();
    // Dark-equilibrium orbital populations implied by the rate pair.
    let (p_lo, p_hi) = if total > 0.0 {
        (rates.gamma_minus / total, rates.gamma_plus / total)
    } else {
        (0.5, 0.5)
    };
    let mut rho0 = CMat::zeros(3, 3);
    rho0[(0, 0)] = c(p_lo, 0.0);
    rho0[(1, 1)] = c(p_hi, 0.0);

    let tp = cfg.pulse_duration;
    let mut signal = Vec::with_capacity(cfg.delays.len());
    for &delay in &cfg.delays {
        let read_start = tp + delay;
        let read_end = read_start + cfg.readout_window;

        let mut sys = LevelSystem::new(CMat::zeros(3, 3));
        for center in [0.5 * tp, read_start + 0.5 * tp] {
            sys.drives.push(Drive {
                coupling: basis_matrix(3, 2, 1),
                rabi: cfg.rabi,
                detuning: 0.0,
                phase: 0.0,
                envelope: PulseEnvelope::pulse(PulseShape::Rectangular, tp, center),
                linewidth: 0.0,
            });
        }
        sys.channels.push(CollapseChannel::radiative(
            basis_matrix(3, 0, 2),
            0.5 * cfg.gamma_rad,
        ));
        sys.channels.push(CollapseChannel::radiative(
            basis_matrix(3, 1, 2),
            0.5 * cfg.gamma_rad,
        ));
        if rates.gamma_plus > 0.0 {
            sys.channels
                .push(CollapseChannel::new(basis_matrix(3, 1, 0), rates.gamma_plus));
        }
        if rates.gamma_minus > 0.0 {
            sys.channels
                .push(CollapseChannel::new(basis_matrix(3, 0, 1), rates.gamma_minus));
        }

        let mut t_eval = linspace(0.0, tp, 25);
        t_eval.extend_from_slice(&linspace(tp, read_start, 9)[1..]);
        t_eval.extend_from_slice(&linspace(read_start, read_end, 33)[1..]);
        let traj = evolve(&sys, &rho0, &t_eval, cfg.tol)?;
        signal.push(window_integral(
            &traj.times,
            &traj.fluorescence,
            read_start,
            read_end,
        ));
    }

    reject_flat(&signal, "pumping recovery signal")?;
    let fit = fit_exponential(&cfg.delays, &signal, None)?;
    let t1 = fit.params[1];
    Ok(OpticalPumpingResult {
        delays: cfg.delays.clone(),
        signal,
        fit,
        t1,
    })
}

// ---------------------------------------------------------------------------
// Spin T1 vs field misalignment (qualitative)
// ---------------------------------------------------------------------------

/// Spin relaxation of the ground-state doublet under a tilted field.
///
/// With the field exactly on the symmetry axis the eigenstates are
/// spin-pure, the orbital phonon channels conserve the spin projection, and
/// the doublet never relaxes. Tilting the field mixes the spin character of
/// the eigenstates so the same orbital jumps acquire spin-flip weight; the
/// runner exposes this strong angle dependence. The absolute scale is
/// qualitative: it inherits whatever the orbital calibration says.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SpinT1Config {
    /// Center parameters.
    pub params: SivParameters,
    /// Field magnitude, T.
    pub field_tesla: f64,
    /// Polar angle between the field and the symmetry axis, degrees.
    pub tilt_deg: f64,
    /// Sample temperature, K.
    pub temperature: f64,
    /// Calibrated phonon model.
    pub phonon: PhononModel,
    /// Observation times, s.
    pub times: Vec<f64>,
    /// Integrator tolerance.
    pub tol: f64,
}

impl Default for SpinT1Config {
    fn default() -> Self {
        SpinT1Config {
            params: SivParameters::default(),
            field_tesla: 1.0,
            tilt_deg: 10.0,
            temperature: 2.0,
            phonon: phonon::calibrate(TWO_PI * 48e9, 2.0, 66.5e-9, RateMode::AsWritten)
                .expect("reference calibration point is well-posed"),
            times: linspace(0.0, 12e-6, 121),
            tol: DEFAULT_TOL,
        }
    }
}

/// Outcome of [`run_spin_t1`].
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SpinT1Result {
    /// Observation times, s.
    pub times: Vec<f64>,
    /// Spin projection <S_z> along the symmetry axis.
    pub spin_projection: Vec<f64>,
    /// Exponential fit of the projection decay.
    pub fit: FitResult,
    /// Fitted spin relaxation time, s.
    pub t1_spin: f64,
}

/// Relax an initially spin-polarized doublet state and fit <S_z>(t).
pub fn run_spin_t1(cfg: &SpinT1Config) -> Result<SpinT1Result, SimError> {
    check_positive(cfg.field_tesla, "field_tesla")?;
    check_positive(cfg.temperature, "temperature")?;
    check_grid(&cfg.times, "times")?;
    check_positive(cfg.tol, "tol")?;
    if !cfg.tilt_deg.is_finite() || fmath::abs(cfg.tilt_deg) > 90.0 {
        return Err(SimError::InvalidParameter(
            "tilt_deg must be finite and within +-90 degrees".into(),
        ));
    }

    // Field direction: tilt away from the symmetry axis within a fixed
    // plane (the azimuth is irrelevant for this observable).
    let theta = cfg.tilt_deg * core::f64::consts::PI / 180.0;
    let perp = [
        1.0 / fmath::sqrt(2.0),
        -1.0 / fmath::sqrt(2.0),
        0.0,
    ];
    let dir = [
        fmath::cos(theta) * SIV_AXIS[0] + fmath::sin(theta) * perp[0],
        fmath::cos(theta) * SIV_AXIS[1] + fmath::sin(theta) * perp[1],
        fmath::cos(theta) * SIV_AXIS[2] + fmath::sin(theta) * perp[2],
    ];
    let field = MagneticField::along(dir, cfg.field_tesla)?;
    let manifold = build_ground_hamiltonian(&cfg.params, &field, false)?;
    let es = eigensystem(&manifold)?;
    let channels = relaxation_channels(&es, &orbital_x_op(false), &cfg.phonon, cfg.temperature)?;

    let mut sys = LevelSystem::new(CMat::diag_real(&es.energies));
    sys.channels = channels;

    // Start in the lower-branch eigenstate with the largest spin-up
    // character (the state an ideal initialization pulse would prepare).
    let sz_eig = {
        let v = &es.states;
        v.adjoint().mul(&spin_z_op(false)).mul(v)
    };
    let sz_diag: Vec<f64> = (0..4).map(|k| sz_eig[(k, k)].re).collect();
    let k0 = if sz_diag[0] >= sz_diag[1] { 0 } else { 1 };
    let rho0 = density_from_level(4, k0);

    let traj = evolve(&sys, &rho0, &cfg.times, cfg.tol)?;
    let spin_projection: Vec<f64> = traj.rho.iter().map(|r| expectation(&sz_eig, r)).collect();

    reject_flat(&spin_projection, "spin projection")?;
    let fit = fit_exponential(&cfg.times, &spin_projection, None)?;
    let t1_spin = fit.params[1];
    Ok(SpinT1Result {
        times: cfg.times.clone(),
        spin_projection,
        fit,
        t1_spin,
    })
}

// ---------------------------------------------------------------------------
// Coherent population trapping
// ---------------------------------------------------------------------------

/// Two-laser coherent population trapping on a three-level Λ system.
///
/// Levels: 0, 1 = the two ground spin states, 2 = shared excited state.
/// Both lasers run cw at equal Rabi frequency; the scan axis is the
/// two-photon detuning. Ground-state decoherence enters through two
/// dephasing channels on the 0↔1 coherence: an intrinsic spin linewidth
/// and the mutual (relative-phase) linewidth of the two lasers — only the
/// *relative* laser coherence matters for the dark state, so one channel
/// stands in for both laser spectra. A third dephasing channel on the
/// excited level models the phonon broadening of the optical line (the
/// excited-manifold orbital relaxation); it widens the one-photon dome
/// without touching the dark resonance.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CptConfig {
    /// Per-leg Rabi frequency, rad/s.
    pub rabi: f64,
    /// Radiative decay rate of the excited level, 1/s.
    pub gamma_rad: f64,
    /// Intrinsic spin dephasing linewidth (FWHM), rad/s.
    pub spin_linewidth: f64,
    /// Mutual two-laser linewidth (FWHM), rad/s.
    pub laser_linewidth: f64,
    /// Optical-line broadening beyond the radiative width (FWHM), rad/s.
    pub optical_linewidth: f64,
    /// Common one-photon detuning, rad/s.
    pub one_photon_detuning: f64,
    /// Two-photon detuning sweep, rad/s.
    pub detunings: Vec<f64>,
}

impl Default for CptConfig {
    fn default() -> Self {
        CptConfig {
            rabi: TWO_PI * 17e6,
            gamma_rad: GAMMA_RAD_REF,
            spin_linewidth: TWO_PI * 3.5e6,
            laser_linewidth: TWO_PI * 5.0e6,
            // Of the order of the inverse excited-state coherence times
            // measured by the optical Ramsey protocol.
            optical_linewidth: TWO_PI * 300e6,
            one_photon_detuning: 0.0,
            detunings: linspace(-TWO_PI * 60e6, TWO_PI * 60e6, 241),
        }
    }
}

impl CptConfig {
    fn validate(&self) -> Result<(), SimError> {
        check_positive(self.rabi, "rabi")?;
        check_positive(self.gamma_rad, "gamma_rad")?;
        for (v, name) in [
            (self.spin_linewidth, "spin_linewidth"),
            (self.laser_linewidth, "laser_linewidth"),
            (self.optical_linewidth, "optical_linewidth"),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(SimError::InvalidParameter(format!(
                    "{name} must be non-negative and finite"
                )));
            }
        }
        if !self.one_photon_detuning.is_finite() {
            return Err(SimError::InvalidParameter(
                "one_photon_detuning must be finite".into(),
            ));
        }
        check_grid(&self.detunings, "detunings")
    }

    fn system_at(&self, two_photon: f64) -> LevelSystem {
        let mut h0 = CMat::zeros(3, 3);
        h0[(1, 1)] = c(two_photon, 0.0);
        h0[(2, 2)] = c(self.one_photon_detuning, 0.0);
        let mut sys = LevelSystem::new(h0);
        sys.drives
            .push(Drive::cw(basis_matrix(3, 2, 0), self.rabi));
        sys.drives
            .push(Drive::cw(basis_matrix(3, 2, 1), self.rabi));
        sys.channels.push(CollapseChannel::radiative(
            basis_matrix(3, 0, 2),
            0.5 * self.gamma_rad,
        ));
        sys.channels.push(CollapseChannel::radiative(
            basis_matrix(3, 1, 2),
            0.5 * self.gamma_rad,
        ));
        if self.spin_linewidth > 0.0 {
            sys.channels
                .push(dephasing_channel(3, &[1], &[0], self.spin_linewidth));
        }
        if self.laser_linewidth > 0.0 {
            sys.channels
                .push(dephasing_channel(3, &[1], &[0], self.laser_linewidth));
        }
        if self.optical_linewidth > 0.0 {
            sys.channels
                .push(dephasing_channel(3, &[2], &[0, 1], self.optical_linewidth));
        }
        sys
    }

    /// Full decoherence rate of the optical coherences (sets the dome
    /// width and the power-broadening scale), rad/s.
    fn optical_decoherence(&self) -> f64 {
        self.gamma_rad + self.optical_linewidth
    }
}

/// Outcome of [`run_cpt_scan`].
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CptResult {
    /// Two-photon detunings, Hz.
    pub detunings_hz: Vec<f64>,
    /// Steady-state fluorescence rate at each detuning, 1/s.
    pub fluorescence: Vec<f64>,
    /// Two-Lorentzian fit: broad one-photon dome plus narrow dark dip.
    pub fit: FitResult,
    /// Fitted dip full width at half maximum, Hz.
    pub fwhm_hz: f64,
    /// Fitted dip depth (positive), 1/s.
    pub depth: f64,
    /// Fitted dip center, Hz.
    pub center_hz: f64,
}

fn cpt_fluorescence(cfg: &CptConfig) -> Result<(Vec<f64>, Vec<f64>), SimError> {
    let mut fluor = Vec::with_capacity(cfg.detunings.len());
    for &delta in &cfg.detunings {
        let sys = cfg.system_at(delta);
        let rho = steady_state(&sys)?;
        fluor.push(fluorescence_rate(&sys, &rho));
    }
    let xs_hz: Vec<f64> = cfg.detunings.iter().map(|d| d / TWO_PI).collect();
    Ok((xs_hz, fluor))
}

/// Scan the two-photon detuning and fit the dark-resonance dip.
///
/// Scanning one laser moves its one-photon detuning along with the
/// two-photon detuning, so the trace is a broad scattering dome (width of
/// order the optical decoherence) with the narrow dark dip carved into it. The
/// fit therefore uses one positive and one negative Lorentzian; the dip
/// width reported is that of the negative component.
pub fn run_cpt_scan(cfg: &CptConfig) -> Result<CptResult, SimError> {
    cfg.validate()?;
    let (xs_hz, fluor) = cpt_fluorescence(cfg)?;

    reject_flat(&fluor, "fluorescence scan")?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &f in &fluor {
        lo = lo.min(f);
        hi = hi.max(f);
    }
    let dome_width = cfg.optical_decoherence() / TWO_PI;
    let dip_width = (cfg.spin_linewidth + cfg.laser_linewidth) / TWO_PI
        + 2.0 * cfg.rabi * cfg.rabi / cfg.optical_decoherence() / TWO_PI
        + 1e5;
    let guess = [0.0, hi, 0.0, dome_width, lo - hi, 0.0, dip_width];
    let fit = fit_lorentzian_sum(&xs_hz, &fluor, Some(&guess))?;
    // Identify the dip as the negative-amplitude component.
    let (dome, dip) = if fit.params[1] <= fit.params[4] {
        (&fit.params[4..7], &fit.params[1..4])
    } else {
        (&fit.params[1..4], &fit.params[4..7])
    };
    if dip[0] >= 0.0 || dome[0] <= 0.0 {
        return Err(SimError::FitFailure(
            "CPT fit did not resolve a dip on a positive dome".into(),
        ));
    }
    Ok(CptResult {
        detunings_hz: xs_hz,
        fluorescence: fluor,
        fwhm_hz: fmath::abs(dip[2]),
        depth: -dip[0],
        center_hz: dip[1],
        fit,
    })
}

/// Width of the dark dip from drive power alone: the scan is repeated with
/// both dephasing channels removed over a window matched to the expected
/// power width, and fitted as a flat base plus a single dip (the dome is
/// nearly constant over so narrow a window).
fn cpt_isolated_power_width(cfg: &CptConfig, rabi: f64) -> Result<f64, SimError> {
    // Lowest-order expectation Ω_tot²/Γ_opt sets the scan window; capping it
    // below the dome width keeps the flat-base model valid.
    let width_est_hz = (2.0 * rabi * rabi / cfg.optical_decoherence() / TWO_PI).max(0.1e6);
    let window_hz = (12.0 * width_est_hz).min(40e6);
    let mut probe = cfg.clone();
    probe.rabi = rabi;
    probe.spin_linewidth = 0.0;
    probe.laser_linewidth = 0.0;
    probe.detunings = linspace(-TWO_PI * window_hz, TWO_PI * window_hz, 361);
    let (xs_hz, fluor) = cpt_fluorescence(&probe)?;
    reject_flat(&fluor, "power-broadening probe scan")?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &f in &fluor {
        lo = lo.min(f);
        hi = hi.max(f);
    }
    let guess = [hi, lo - hi, 0.0, width_est_hz];
    let fit = fit_lorentzian_sum(&xs_hz, &fluor, Some(&guess))?;
    Ok(fmath::abs(fit.params[3]))
}

/// Solve for the per-leg Rabi frequency whose *isolated* power-broadening
/// contribution (dip width with all dephasing channels removed) equals
/// `target_hz`. Bisection; the width grows monotonically with power.
pub fn cpt_power_for_isolated_broadening(
    cfg: &CptConfig,
    target_hz: f64,
) -> Result<f64, SimError> {
    check_positive(target_hz, "target_hz")?;
    let mut lo = TWO_PI * 2e6;
    let mut hi = TWO_PI * 60e6;
    if cpt_isolated_power_width(cfg, lo)? > target_hz {
        return Err(SimError::FitFailure(
            "target broadening is below the weakest probe power".into(),
        ));
    }
    while cpt_isolated_power_width(cfg, hi)? < target_hz {
        hi *= 2.0;
        if hi > TWO_PI * 2e9 {
            return Err(SimError::FitFailure(
                "target broadening not reachable at sane drive power".into(),
            ));
        }
    }
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        if cpt_isolated_power_width(cfg, mid)? < target_hz {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-3 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// ODMR of the ground-state doublet (29Si hyperfine)
// ---------------------------------------------------------------------------

/// Pulsed ODMR scan across the ground-state spin resonance.
///
/// The ground manifold is diagonalized at the configured field (along the
/// symmetry axis); a microwave π pulse of fixed duration is applied at each
/// scan frequency and the transferred spin-up population is recorded. With
/// the 29Si nuclear spin enabled the resonance splits into two hyperfine
/// lines separated by the parallel hyperfine constant.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OdmrConfig {
    /// Center parameters (`hyperfine_apar` sets the line splitting).
    pub params: SivParameters,
    /// Field magnitude along the symmetry axis, T.
    pub field_tesla: f64,
    /// Whether to include the 29Si nuclear spin.
    pub hyperfine: bool,
    /// Microwave Rabi frequency, rad/s (sets the power-broadened width).
    pub rabi: f64,
    /// Scan frequencies, Hz. `None` auto-centers on the doublet resonance.
    pub frequencies: Option<Vec<f64>>,
    /// Integrator tolerance.
    pub tol: f64,
}

impl Default for OdmrConfig {
    fn default() -> Self {
        OdmrConfig {
            params: SivParameters::default(),
            field_tesla: 0.1,
            hyperfine: true,
            rabi: TWO_PI * 4e6,
            frequencies: None,
            tol: DEFAULT_TOL,
        }
    }
}

/// Outcome of [`run_odmr_scan`].
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OdmrResult {
    /// Scan frequencies, Hz.
    pub frequencies: Vec<f64>,
    /// Spin-up population after the π pulse.
    pub contrast: Vec<f64>,
    /// Fitted line centers, Hz (ascending).
    pub centers_hz: Vec<f64>,
    /// Distance between the two hyperfine lines, Hz (None without the
    /// nuclear spin).
    pub splitting_hz: Option<f64>,
    /// Lorentzian line fit (one or two peaks on a flat base).
    pub fit: FitResult,
}

/// Scan a microwave π pulse across the doublet resonance.
pub fn run_odmr_scan(cfg: &OdmrConfig) -> Result<OdmrResult, SimError> {
    check_positive(cfg.field_tesla, "field_tesla")?;
    check_positive(cfg.rabi, "rabi")?;
    check_positive(cfg.tol, "tol")?;
    let field = MagneticField::along(SIV_AXIS, cfg.field_tesla)?;
    let manifold = build_ground_hamiltonian(&cfg.params, &field, cfg.hyperfine)?;
    let es = eigensystem(&manifold)?;
    let dim = es.dim();

    let sz = eigen_diagonal(&es, &spin_z_op(cfg.hyperfine));
    let iz = if cfg.hyperfine {
        eigen_diagonal(&es, &nuclear_z_op())
    } else {
        vec![0.0; dim]
    };

    // Transition pairs within the lower orbital branch: spin-down state →
    // the spin-up state with the same nuclear projection.
    let lower = dim / 2;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for k in 0..lower {
        if sz[k] >= 0.0 {
            continue;
        }
        for j in 0..lower {
            if sz[j] > 0.0 && (!cfg.hyperfine || (iz[j] > 0.0) == (iz[k] > 0.0)) {
                pairs.push((k, j));
                break;
            }
        }
    }
    if pairs.is_empty() {
        return Err(SimError::InvalidParameter(
            "could not identify doublet transitions (is the field too weak?)".into(),
        ));
    }

    // Unit-weight drive pattern connecting each pair; the drive amplitude
    // is specified at the spin, not at the antenna.
    let mut coupling = CMat::zeros(dim, dim);
    for &(down, up) in &pairs {
        coupling[(up, down)] = C_ONE;
    }
    let center_hz =
        pairs.iter().map(|&(d, u)| es.energies[u] - es.energies[d]).sum::<f64>()
            / (pairs.len() as f64 * TWO_PI);
    let span = if cfg.hyperfine { 90e6 } else { 45e6 };
    let frequencies = match &cfg.frequencies {
        Some(f) => {
            check_grid(f, "frequencies")?;
            f.clone()
        }
        None => linspace(center_hz - span, center_hz + span, 181),
    };

    // Populations start in the spin-down half of the lower doublet.
    let downs: Vec<usize> = pairs.iter().map(|&(d, _)| d).collect();
    let mut rho0 = CMat::zeros(dim, dim);
    for &d in &downs {
        rho0[(d, d)] = c(1.0 / downs.len() as f64, 0.0);
    }
    let up_projector = {
        let mut p = CMat::zeros(dim, dim);
        for &(_, u) in &pairs {
            p[(u, u)] = C_ONE;
        }
        p
    };

    let t_pi = core::f64::consts::PI / cfg.rabi;
    let t_eval = [0.0, 0.5 * t_pi, t_pi];
    let mut contrast = Vec::with_capacity(frequencies.len());
    for &f_hz in &frequencies {
        let omega = TWO_PI * f_hz;
        // Frame rotating at the microwave frequency: subtract ω from every
        // spin-up eigenstate. Undriven coherences stay zero, so the large
        // frame-shifted energies of the upper branch are harmless.
        let diag: Vec<f64> = (0..dim)
            .map(|k| es.energies[k] - if sz[k] > 0.0 { omega } else { 0.0 })
            .collect();
        let mut sys = LevelSystem::new(CMat::diag_real(&diag));
        sys.drives.push(Drive::cw(coupling.clone(), cfg.rabi));
        let traj = evolve(&sys, &rho0, &t_eval, cfg.tol)?;
        contrast.push(expectation(&up_projector, traj.rho.last().unwrap()));
    }

    reject_flat(&contrast, "ODMR contrast")?;
    let mut base = f64::INFINITY;
    let mut peak = f64::NEG_INFINITY;
    for &y in &contrast {
        base = base.min(y);
        peak = peak.max(y);
    }
    let w0 = cfg.rabi / TWO_PI;
    let apar = fmath::abs(cfg.params.hyperfine_apar);
    let guess: Vec<f64> = if cfg.hyperfine {
        vec![
            base,
            peak - base,
            center_hz - 0.5 * apar,
            w0,
            peak - base,
            center_hz + 0.5 * apar,
            w0,
        ]
    } else {
        vec![base, peak - base, center_hz, w0]
    };
    let fit = fit_lorentzian_sum(&frequencies, &contrast, Some(&guess))?;
    let mut centers_hz: Vec<f64> = fit.params[1..]
        .chunks(3)
        .map(|peak| peak[1])
        .collect();
    centers_hz.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let splitting_hz = if centers_hz.len() == 2 {
        Some(centers_hz[1] - centers_hz[0])
    } else {
        None
    };
    Ok(OdmrResult {
        frequencies,
        contrast,
        centers_hz,
        splitting_hz,
        fit,
    })
}

// ---------------------------------------------------------------------------
// Microwave Rabi and Ramsey on the ground doublet
// ---------------------------------------------------------------------------

/// Thermal phonon environment for the microwave runners.
///
/// The phonon model is recalibrated so the *orbital* relaxation time at the
/// actual branch gap equals `t1_target`; the temperature then fixes the
/// up/down rate split and thereby the emergent spin coherence time.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MwRelaxation {
    /// Sample temperature, K.
    pub temperature: f64,
    /// Orbital relaxation time the phonon model is calibrated to, s.
    pub t1_target: f64,
    /// Phonon rate convention.
    pub rate_mode: RateMode,
}

impl Default for MwRelaxation {
    fn default() -> Self {
        MwRelaxation {
            temperature: 2.0,
            t1_target: 66.5e-9,
            rate_mode: RateMode::AsWritten,
        }
    }
}

/// Common setup for microwave control of the lowest ground doublet.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MwConfig {
    /// Center parameters.
    pub params: SivParameters,
    /// Field magnitude, T.
    pub field_tesla: f64,
    /// Field direction (lab frame, need not be normalized).
    pub field_axis: [f64; 3],
    /// Phonon environment; `None` is the coherent (frozen-out) limit.
    pub relaxation: Option<MwRelaxation>,
    /// Microwave Rabi frequency, rad/s.
    pub rabi: f64,
    /// Integrator tolerance.
    pub tol: f64,
}

impl Default for MwConfig {
    fn default() -> Self {
        MwConfig {
            params: SivParameters::default(),
            field_tesla: 0.1,
            field_axis: [0.0, 0.0, 1.0],
            relaxation: None,
            rabi: TWO_PI * 15e6,
            tol: DEFAULT_TOL,
        }
    }
}

struct MwSystem {
    energies: Vec<f64>,
    channels: Vec<CollapseChannel>,
    /// Frame weights: 1 for the upper member of each branch pair.
    frame: [f64; 4],
    /// Qubit splitting E1 - E0, rad/s.
    omega_q: f64,
}

/// Diagonalize the ground manifold, calibrate the phonon model to the
/// configured orbital T1 at the actual branch gap, and build the
/// eigenbasis relaxation channels.
fn mw_ground_system(cfg: &MwConfig) -> Result<MwSystem, SimError> {
    check_positive(cfg.field_tesla, "field_tesla")?;
    check_positive(cfg.rabi, "rabi")?;
    check_positive(cfg.tol, "tol")?;
    let field = MagneticField::along(cfg.field_axis, cfg.field_tesla)?;
    let manifold = build_ground_hamiltonian(&cfg.params, &field, false)?;
    let es = eigensystem(&manifold)?;

    let channels = if let Some(relax) = &cfg.relaxation {
        check_positive(relax.temperature, "temperature")?;
        check_positive(relax.t1_target, "t1_target")?;
        // Dominant orbital gap seen by each qubit state: the partner in
        // the upper branch it couples to most strongly.
        let x_op = orbital_x_op(false);
        let m = es.states.adjoint().mul(&x_op).mul(&es.states);
        let mut gap_sum = 0.0;
        for k in [0usize, 1] {
            let mut best = 2;
            if m[(k, 3)].norm_sqr() > m[(k, 2)].norm_sqr() {
                best = 3;
            }
            gap_sum += es.energies[best] - es.energies[k];
        }
        let model = phonon::calibrate(
            0.5 * gap_sum,
            relax.temperature,
            relax.t1_target,
            relax.rate_mode,
        )?;
        relaxation_channels(&es, &x_op, &model, relax.temperature)?
    } else {
        Vec::new()
    };
    Ok(MwSystem {
        omega_q: es.energies[1] - es.energies[0],
        energies: es.energies,
        channels,
        frame: [0.0, 1.0, 0.0, 1.0],
    })
}

impl MwSystem {
    /// Level system in the frame rotating at `omega_mw` on the qubit.
    fn system(&self, omega_mw: f64) -> LevelSystem {
        let diag: Vec<f64> = (0..4)
            .map(|k| self.energies[k] - self.frame[k] * omega_mw)
            .collect();
        let mut sys = LevelSystem::new(CMat::diag_real(&diag));
        sys.channels = self.channels.clone();
        sys
    }
}

/// Outcome of a Rabi-style sweep.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RabiResult {
    /// Drive durations, s.
    pub durations: Vec<f64>,
    /// Excited/upper-state population after each duration.
    pub population: Vec<f64>,
    /// Damped-sinusoid fit.
    pub fit: FitResult,
    /// Fitted Rabi frequency, Hz.
    pub frequency_hz: f64,
}

/// Resonant microwave Rabi oscillation of the ground doublet.
pub fn run_mw_rabi(cfg: &MwConfig, durations: &[f64]) -> Result<RabiResult, SimError> {
    check_grid(durations, "durations")?;
    let mw = mw_ground_system(cfg)?;
    let mut sys = mw.system(mw.omega_q);
    sys.drives
        .push(Drive::cw(basis_matrix(4, 1, 0), cfg.rabi));
    let traj = evolve(&sys, &density_from_level(4, 0), durations, cfg.tol)?;
    let population = traj.population_of(1);

    reject_flat(&population, "Rabi trace")?;
    let span = durations[durations.len() - 1] - durations[0];
    let guess = [0.5, span, cfg.rabi / TWO_PI, core::f64::consts::PI, 0.5];
    let fit = fit_damped_sinusoid(durations, &population, Some(&guess))?;
    let frequency_hz = fit.params[2];
    Ok(RabiResult {
        durations: durations.to_vec(),
        population,
        fit,
        frequency_hz,
    })
}

/// Microwave Ramsey configuration.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MwRamseyConfig {
    /// Shared ground-doublet setup; `base.rabi` sets the π/2 pulse power.
    pub base: MwConfig,
    /// Microwave detuning from the qubit resonance, rad/s (the fringe
    /// frequency).
    pub detuning: f64,
    /// Free-precession delays between the π/2 pulses, s.
    pub delays: Vec<f64>,
}

impl Default for MwRamseyConfig {
    fn default() -> Self {
        let mut base = MwConfig::default();
        base.rabi = TWO_PI * 50e6;
        base.relaxation = Some(MwRelaxation::default());
        MwRamseyConfig {
            base,
            detuning: TWO_PI * 25e6,
            delays: linspace(2e-9, 402e-9, 161),
        }
    }
}

/// Outcome of a Ramsey-style sweep.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RamseyResult {
    /// Free-precession delays, s.
    pub delays: Vec<f64>,
    /// Phase-cycled fringe signal (population difference between the
    /// 0- and π-phased second pulse).
    pub signal: Vec<f64>,
    /// Damped-sinusoid fit.
    pub fit: FitResult,
    /// Fitted coherence time, s.
    pub t2_star: f64,
    /// Fitted fringe frequency, Hz.
    pub fringe_hz: f64,
}

/// Two-pulse microwave Ramsey interference of the ground doublet.
///
/// The second π/2 pulse is phase-cycled (0 and π) and the two outcomes
/// subtracted, which cancels the incoherent population-relaxation baseline
/// and leaves the pure fringe `A·exp(-τ/T2*)·cos(δτ + φ)`.
pub fn run_mw_ramsey(cfg: &MwRamseyConfig) -> Result<RamseyResult, SimError> {
    check_grid(&cfg.delays, "delays")?;
    if cfg.delays[0] <= 0.0 {
        return Err(SimError::InvalidParameter(
            "delays must be positive (pulses may not overlap)".into(),
        ));
    }
    if !(fmath::abs(cfg.detuning) > 0.0) || !cfg.detuning.is_finite() {
        return Err(SimError::InvalidParameter(
            "detuning must be nonzero and finite (it sets the fringe)".into(),
        ));
    }
    let mw = mw_ground_system(&cfg.base)?;
    let omega_mw = mw.omega_q + cfg.detuning;
    let tp = 0.5 * core::f64::consts::PI / cfg.base.rabi;
    let rho0 = density_from_level(4, 0);

    let run_once = |delay: f64, phase2: f64| -> Result<f64, SimError> {
        let mut sys = mw.system(omega_mw);
        let end = 2.0 * tp + delay;
        for (center, phase) in [(0.5 * tp, 0.0), (end - 0.5 * tp, phase2)] {
            sys.drives.push(Drive {
                coupling: basis_matrix(4, 1, 0),
                rabi: cfg.base.rabi,
                detuning: 0.0,
                phase,
                envelope: PulseEnvelope::pulse(PulseShape::Rectangular, tp, center),
                linewidth: 0.0,
            });
        }
        let t_eval = [0.0, tp, tp + delay, end];
        let traj = evolve(&sys, &rho0, &t_eval, cfg.base.tol)?;
        Ok(traj.populations.last().unwrap()[1])
    };

    let mut signal = Vec::with_capacity(cfg.delays.len());
    for &delay in &cfg.delays {
        signal.push(run_once(delay, 0.0)? - run_once(delay, core::f64::consts::PI)?);
    }

    reject_flat(&signal, "Ramsey fringe signal")?;
    let fit = fit_damped_sinusoid(&cfg.delays, &signal, None)?;
    Ok(RamseyResult {
        delays: cfg.delays.clone(),
        signal,
        t2_star: fit.params[1],
        fringe_hz: fit.params[2],
        fit,
    })
}

// ---------------------------------------------------------------------------
// Optical Rabi: pulse-area sweep
// ---------------------------------------------------------------------------

/// Pulse-area sweep of a resonant picosecond pulse on one optical line.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OpticalRabiConfig {
    /// Radiative decay rate, 1/s.
    pub gamma_rad: f64,
    /// Field-envelope FWHM of the two-sided exponential pulse, s.
    pub pulse_width: f64,
    /// Pulse areas to sweep, rad.
    pub areas: Vec<f64>,
    /// Integrator tolerance.
    pub tol: f64,
}

impl Default for OpticalRabiConfig {
    fn default() -> Self {
        OpticalRabiConfig {
            gamma_rad: GAMMA_RAD_REF,
            pulse_width: 12e-12,
            areas: linspace(0.0, 10.0 * core::f64::consts::PI, 121),
            tol: DEFAULT_TOL,
        }
    }
}

/// Outcome of [`run_optical_rabi`].
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OpticalRabiResult {
    /// Pulse areas, rad.
    pub areas: Vec<f64>,
    /// Excited population right after the pulse.
    pub excited_population: Vec<f64>,
    /// Populations at the odd-π areas (the oscillation maxima).
    pub peak_values: Vec<f64>,
    /// Relative drop from the first to the last maximum.
    pub visibility_loss: f64,
}

/// Sweep the pulse area and record the post-pulse excited population.
pub fn run_optical_rabi(cfg: &OpticalRabiConfig) -> Result<OpticalRabiResult, SimError> {
    check_positive(cfg.gamma_rad, "gamma_rad")?;
    check_positive(cfg.pulse_width, "pulse_width")?;
    check_positive(cfg.tol, "tol")?;
    check_grid(&cfg.areas, "areas")?;
    if cfg.areas[0] < 0.0 {
        return Err(SimError::InvalidParameter(
            "areas must be non-negative".into(),
        ));
    }

    // Center the pulse at 6 FWHM so the truncated tails carry < 1e-3 of
    // the area.
    let w = cfg.pulse_width;
    let t0 = 6.0 * w;
    let t_end = 12.0 * w;
    let envelope = PulseEnvelope::pulse(PulseShape::TwoSidedExponential, w, t0);
    let env_area = envelope.integral();
    let rho0 = density_from_level(2, 0);

    let mut excited = Vec::with_capacity(cfg.areas.len());
    for &area in &cfg.areas {
        let mut sys = LevelSystem::new(CMat::zeros(2, 2));
        sys.drives.push(Drive {
            coupling: basis_matrix(2, 1, 0),
            rabi: area / env_area,
            detuning: 0.0,
            phase: 0.0,
            envelope,
            linewidth: 0.0,
        });
        sys.channels
            .push(CollapseChannel::radiative(basis_matrix(2, 0, 1), cfg.gamma_rad));
        let traj = evolve(&sys, &rho0, &[0.0, t0, t_end], cfg.tol)?;
        excited.push(traj.populations.last().unwrap()[1]);
    }

    // Oscillation maxima sit at odd multiples of π.
    let mut peak_values = Vec::new();
    let max_area = cfg.areas[cfg.areas.len() - 1];
    let mut k = 1.0;
    while k * core::f64::consts::PI <= max_area + 1e-9 {
        let target = k * core::f64::consts::PI;
        let mut best = 0;
        for (i, &a) in cfg.areas.iter().enumerate() {
            if fmath::abs(a - target) < fmath::abs(cfg.areas[best] - target) {
                best = i;
            }
        }
        peak_values.push(excited[best]);
        k += 2.0;
    }
    let visibility_loss = match (peak_values.first(), peak_values.last()) {
        (Some(&first), Some(&last)) if first > 0.0 => (first - last) / first,
        _ => 0.0,
    };
    Ok(OpticalRabiResult {
        areas: cfg.areas.clone(),
        excited_population: excited,
        peak_values,
        visibility_loss,
    })
}

// ---------------------------------------------------------------------------
// Optical Ramsey: excited-state orbital coherence
// ---------------------------------------------------------------------------

/// Which excited orbital branch the pulse pair addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum ExcitedBranch {
    /// Lower excited branch (long-lived orbital coherence).
    Lower,
    /// Upper excited branch (fast intra-manifold decay).
    Upper,
}

/// Excited-manifold relaxation rates implied by a pair of measured optical
/// coherence times.
///
/// The optical coherence with a branch decays at half that branch's total
/// population loss. Given the radiative rate, the coherence times of the
/// lower and upper branches therefore pin the upward (lower→upper) and
/// downward (upper→lower) intra-manifold rates:
/// `γ_up = 2/T2(lower) - γ_rad`, `γ_down = 2/T2(upper) - γ_rad`.
pub fn excited_coherence_rates(
    t2_lower: f64,
    t2_upper: f64,
    gamma_rad: f64,
) -> Result<(f64, f64), SimError> {
    check_positive(t2_lower, "t2_lower")?;
    check_positive(t2_upper, "t2_upper")?;
    check_positive(gamma_rad, "gamma_rad")?;
    let up = 2.0 / t2_lower - gamma_rad;
    let down = 2.0 / t2_upper - gamma_rad;
    if up <= 0.0 || down <= 0.0 {
        return Err(SimError::InvalidParameter(
            "coherence times exceed the radiative bound; no positive rates exist".into(),
        ));
    }
    Ok((up, down))
}

/// Optical Ramsey configuration.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OpticalRamseyConfig {
    /// Which excited branch the pulses drive.
    pub branch: ExcitedBranch,
    /// Radiative decay rate of each excited branch, 1/s.
    pub gamma_rad: f64,
    /// Upward intra-manifold rate (lower→upper), 1/s.
    pub gamma_up: f64,
    /// Downward intra-manifold rate (upper→lower), 1/s.
    pub gamma_down: f64,
    /// Excited-state orbital splitting, rad/s.
    pub excited_splitting: f64,
    /// Laser detuning from the driven line, rad/s (the fringe frequency).
    pub detuning: f64,
    /// Field-envelope FWHM of each π/2 pulse, s.
    pub pulse_width: f64,
    /// Center-to-center pulse delays, s.
    pub delays: Vec<f64>,
    /// Integrator tolerance.
    pub tol: f64,
}

impl OpticalRamseyConfig {
    /// Reference configuration for one branch: intra-manifold rates set by
    /// the measured coherence-time pair (1044 ps lower, 398 ps upper) and a
    /// fringe detuning giving a few periods per coherence time.
    pub fn for_branch(branch: ExcitedBranch) -> Self {
        let (gamma_up, gamma_down) =
            excited_coherence_rates(1044e-12, 398e-12, GAMMA_RAD_REF)
                .expect("reference coherence times are consistent");
        let (detuning, delays) = match branch {
            ExcitedBranch::Lower => (TWO_PI * 2e9, linspace(48e-12, 3048e-12, 151)),
            ExcitedBranch::Upper => (TWO_PI * 5e9, linspace(24e-12, 1224e-12, 151)),
        };
        OpticalRamseyConfig {
            branch,
            gamma_rad: GAMMA_RAD_REF,
            gamma_up,
            gamma_down,
            excited_splitting: TWO_PI * 259e9,
            detuning,
            pulse_width: 12e-12,
            delays,
            tol: DEFAULT_TOL,
        }
    }
}

impl Default for OpticalRamseyConfig {
    fn default() -> Self {
        OpticalRamseyConfig::for_branch(ExcitedBranch::Lower)
    }
}

/// Two-pulse optical Ramsey interference on one excited branch.
///
/// Levels: 0 = ground, 1 = lower excited branch, 2 = upper excited branch.
/// Both detuned π/2 pulses drive the configured branch; the fringe decays
/// with that branch's optical coherence time. The second pulse is
/// phase-cycled as in [`run_mw_ramsey`].
pub fn run_optical_ramsey(cfg: &OpticalRamseyConfig) -> Result<RamseyResult, SimError> {
    check_positive(cfg.gamma_rad, "gamma_rad")?;
    check_positive(cfg.gamma_up, "gamma_up")?;
    check_positive(cfg.gamma_down, "gamma_down")?;
    check_positive(cfg.excited_splitting, "excited_splitting")?;
    check_positive(cfg.pulse_width, "pulse_width")?;
    check_positive(cfg.tol, "tol")?;
    if !(fmath::abs(cfg.detuning) > 0.0) || !cfg.detuning.is_finite() {
        return Err(SimError::InvalidParameter(
            "detuning must be nonzero and finite (it sets the fringe)".into(),
        ));
    }
    check_grid(&cfg.delays, "delays")?;

    let w = cfg.pulse_width;
    if cfg.delays[0] <= 0.0 {
        return Err(SimError::InvalidParameter(
            "delays must be positive".into(),
        ));
    }

    let driven = match cfg.branch {
        ExcitedBranch::Lower => 1usize,
        ExcitedBranch::Upper => 2usize,
    };
    // Laser frame: the driven level sits at the detuning, its partner at
    // its physical offset from there.
    let mut diag = [0.0; 3];
    diag[driven] = cfg.detuning;
    diag[3 - driven] = match cfg.branch {
        ExcitedBranch::Lower => cfg.detuning + cfg.excited_splitting,
        ExcitedBranch::Upper => cfg.detuning - cfg.excited_splitting,
    };
    let h0 = CMat::diag_real(&diag);

    let envelope_area = PulseEnvelope::pulse(PulseShape::TwoSidedExponential, w, 0.0).integral();
    let rabi = 0.5 * core::f64::consts::PI / envelope_area;
    let rho0 = density_from_level(3, 0);

    let run_once = |delay: f64, phase2: f64| -> Result<f64, SimError> {
        let mut sys = LevelSystem::new(h0.clone());
        let t1 = 6.0 * w;
        let t2 = t1 + delay;
        for (center, phase) in [(t1, 0.0), (t2, phase2)] {
            sys.drives.push(Drive {
                coupling: basis_matrix(3, driven, 0),
                rabi,
                detuning: 0.0,
                phase,
                envelope: PulseEnvelope::pulse(PulseShape::TwoSidedExponential, w, center),
                linewidth: 0.0,
            });
        }
        sys.channels.push(CollapseChannel::radiative(
            basis_matrix(3, 0, 1),
            cfg.gamma_rad,
        ));
        sys.channels.push(CollapseChannel::radiative(
            basis_matrix(3, 0, 2),
            cfg.gamma_rad,
        ));
        sys.channels
            .push(CollapseChannel::new(basis_matrix(3, 2, 1), cfg.gamma_up));
        sys.channels
            .push(CollapseChannel::new(basis_matrix(3, 1, 2), cfg.gamma_down));
        let t_eval = [0.0, t1, t2, t2 + 6.0 * w];
        let traj = evolve(&sys, &rho0, &t_eval, cfg.tol)?;
        Ok(traj.populations.last().unwrap()[driven])
    };

    let mut signal = Vec::with_capacity(cfg.delays.len());
    for &delay in &cfg.delays {
        signal.push(run_once(delay, 0.0)? - run_once(delay, core::f64::consts::PI)?);
    }

    reject_flat(&signal, "optical Ramsey fringe")?;
    let fit = fit_damped_sinusoid(&cfg.delays, &signal, None)?;
    Ok(RamseyResult {
        delays: cfg.delays.clone(),
        signal,
        t2_star: fit.params[1],
        fringe_hz: fit.params[2],
        fit,
    })
}

// ---------------------------------------------------------------------------
// Raman Rabi and Ramsey across the ground doublet
// ---------------------------------------------------------------------------

/// Two-field Raman drive of the ground doublet through a far-detuned
/// excited state.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RamanRabiConfig {
    /// Per-leg Rabi frequency, rad/s.
    pub omega: f64,
    /// One-photon detuning from the excited state, rad/s.
    pub delta: f64,
    /// Radiative decay rate of the excited state, 1/s.
    pub gamma_rad: f64,
    /// Drive durations sampled along one evolution, s.
    pub times: Vec<f64>,
    /// Integrator tolerance (the far-detuned problem is stiff; the fit is
    /// insensitive below ~1e-6).
    pub tol: f64,
}

impl Default for RamanRabiConfig {
    fn default() -> Self {
        // Ω_eff = Ω²/2Δ = 2π·20 MHz at the reference Δ/Ω = 50, giving a
        // 50 ns transfer period.
        RamanRabiConfig {
            omega: TWO_PI * 2e9,
            delta: TWO_PI * 100e9,
            gamma_rad: GAMMA_RAD_REF,
            times: linspace(0.0, 125e-9, 251),
            tol: 1e-7,
        }
    }
}

/// Outcome of [`run_raman_rabi`].
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RamanRabiResult {
    /// Drive durations, s.
    pub times: Vec<f64>,
    /// Population transferred to the other ground state.
    pub transfer: Vec<f64>,
    /// Damped-sinusoid fit of the transfer oscillation.
    pub fit: FitResult,
    /// Fitted effective Rabi frequency, Hz.
    pub omega_eff_hz: f64,
    /// Adiabatic-elimination prediction Ω²/2Δ, Hz.
    pub omega_formula_hz: f64,
}

/// Drive both Raman legs continuously and fit the ground-state transfer.
///
/// Frame: both lasers on two-photon resonance, so the grounds are
/// degenerate at 0 and the excited state sits at the one-photon detuning.
pub fn run_raman_rabi(cfg: &RamanRabiConfig) -> Result<RamanRabiResult, SimError> {
    check_positive(cfg.omega, "omega")?;
    check_positive(cfg.gamma_rad, "gamma_rad")?;
    check_positive(cfg.tol, "tol")?;
    check_grid(&cfg.times, "times")?;
    if !(fmath::abs(cfg.delta) > 0.0) || !cfg.delta.is_finite() {
        return Err(SimError::InvalidParameter(
            "delta must be nonzero and finite".into(),
        ));
    }

    let mut h0 = CMat::zeros(3, 3);
    h0[(2, 2)] = c(cfg.delta, 0.0);
    let mut sys = LevelSystem::new(h0);
    sys.drives.push(Drive::cw(basis_matrix(3, 2, 0), cfg.omega));
    sys.drives.push(Drive::cw(basis_matrix(3, 2, 1), cfg.omega));
    sys.channels.push(CollapseChannel::radiative(
        basis_matrix(3, 0, 2),
        0.5 * cfg.gamma_rad,
    ));
    sys.channels.push(CollapseChannel::radiative(
        basis_matrix(3, 1, 2),
        0.5 * cfg.gamma_rad,
    ));

    let traj = evolve(&sys, &density_from_level(3, 0), &cfg.times, cfg.tol)?;
    let transfer = traj.population_of(1);

    let omega_formula_hz = cfg.omega * cfg.omega / (2.0 * fmath::abs(cfg.delta)) / TWO_PI;
    reject_flat(&transfer, "Raman transfer")?;
    let span = cfg.times[cfg.times.len() - 1] - cfg.times[0];
    let guess = [0.5, 10.0 * span, omega_formula_hz, core::f64::consts::PI, 0.5];
    let fit = fit_damped_sinusoid(&cfg.times, &transfer, Some(&guess))?;
    let omega_eff_hz = fit.params[2];
    Ok(RamanRabiResult {
        times: cfg.times.clone(),
        transfer,
        fit,
        omega_eff_hz,
        omega_formula_hz,
    })
}

/// Sub-cycle Raman Ramsey interferometer across the ground doublet.
///
/// Each interferometer arm is one broadband pulse driving *both* Λ legs
/// with the same carrier and envelope. The pulse pair then constitutes a
/// fixed-frequency phase reference while the ground coherence precesses at
/// the full ground splitting, so the delay scan reads out fringes at δ_g
/// even though δ_g is far beyond the effective two-photon Rabi frequency.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RamanRamseyConfig {
    /// Peak per-leg Rabi frequency, rad/s.
    pub omega: f64,
    /// One-photon detuning of the carrier, rad/s.
    pub delta: f64,
    /// Ground-state splitting, rad/s (the expected fringe frequency).
    pub delta_g: f64,
    /// Radiative decay rate of the excited state, 1/s.
    pub gamma_rad: f64,
    /// Field-envelope FWHM of each pulse, s.
    pub pulse_width: f64,
    /// Center-to-center pulse separations, s.
    pub delays: Vec<f64>,
    /// Integrator tolerance.
    pub tol: f64,
}

impl Default for RamanRamseyConfig {
    fn default() -> Self {
        let delta = TWO_PI * 470e9;
        let pulse_width = 4e-12;
        // Peak amplitude giving a two-photon pulse area of π/2:
        // ∫ Ω(t)²/(2Δ) dt = π/2 for the two-sided exponential envelope.
        let omega = fmath::sqrt(TWO_PI * core::f64::consts::LN_2 * delta / pulse_width);
        RamanRamseyConfig {
            omega,
            delta,
            delta_g: TWO_PI * 48e9,
            gamma_rad: GAMMA_RAD_REF,
            pulse_width,
            delays: linspace(30e-12, 670e-12, 161),
            tol: DEFAULT_TOL,
        }
    }
}

/// Outcome of [`run_raman_ramsey`].
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RamanRamseyResult {
    /// Pulse gaps, s.
    pub delays: Vec<f64>,
    /// Transferred population after the second pulse.
    pub transfer: Vec<f64>,
    /// Damped-sinusoid fit of the fringe.
    pub fit: FitResult,
    /// Fitted fringe frequency, Hz.
    pub fringe_hz: f64,
}

/// Run the two-pulse Raman interferometer and fit the sub-cycle fringe.
///
/// Frame: the carrier frame, with the grounds at (0, δg) and the excited
/// state at the one-photon detuning Δ. Both legs of each pulse carry zero
/// drive detuning (one shared carrier), so the free ground coherence winds
/// at exactly δg between the pulses; the smooth envelope returns the
/// excited amplitude adiabatically and leaves a clean fringe.
pub fn run_raman_ramsey(cfg: &RamanRamseyConfig) -> Result<RamanRamseyResult, SimError> {
    check_positive(cfg.omega, "omega")?;
    check_positive(cfg.delta_g, "delta_g")?;
    check_positive(cfg.gamma_rad, "gamma_rad")?;
    check_positive(cfg.pulse_width, "pulse_width")?;
    check_positive(cfg.tol, "tol")?;
    check_grid(&cfg.delays, "delays")?;
    if !(fmath::abs(cfg.delta) > 0.0) || !cfg.delta.is_finite() {
        return Err(SimError::InvalidParameter(
            "delta must be nonzero and finite".into(),
        ));
    }
    let w = cfg.pulse_width;
    if cfg.delays[0] < 6.0 * w {
        return Err(SimError::InvalidParameter(
            "delays must exceed six pulse widths (non-overlapping pulses)".into(),
        ));
    }

    let mut h0 = CMat::zeros(3, 3);
    h0[(1, 1)] = c(cfg.delta_g, 0.0);
    h0[(2, 2)] = c(cfg.delta, 0.0);
    let rho0 = density_from_level(3, 0);

    let mut transfer = Vec::with_capacity(cfg.delays.len());
    for &delay in &cfg.delays {
        let t1 = 6.0 * w;
        let t2 = t1 + delay;
        let mut sys = LevelSystem::new(h0.clone());
        for center in [t1, t2] {
            let envelope = PulseEnvelope::pulse(PulseShape::TwoSidedExponential, w, center);
            for lower in [0usize, 1] {
                sys.drives.push(Drive {
                    coupling: basis_matrix(3, 2, lower),
                    rabi: cfg.omega,
                    detuning: 0.0,
                    phase: 0.0,
                    envelope,
                    linewidth: 0.0,
                });
            }
        }
        sys.channels.push(CollapseChannel::radiative(
            basis_matrix(3, 0, 2),
            0.5 * cfg.gamma_rad,
        ));
        sys.channels.push(CollapseChannel::radiative(
            basis_matrix(3, 1, 2),
            0.5 * cfg.gamma_rad,
        ));
        let t_eval = [0.0, t1, t1 + 0.5 * delay, t2, t2 + 6.0 * w];
        let traj = evolve(&sys, &rho0, &t_eval, cfg.tol)?;
        transfer.push(traj.populations.last().unwrap()[1]);
    }

    reject_flat(&transfer, "Raman fringe")?;
    let fit = fit_damped_sinusoid(&cfg.delays, &transfer, None)?;
    Ok(RamanRamseyResult {
        delays: cfg.delays.clone(),
        transfer,
        fringe_hz: fit.params[2],
        fit,
    })
}

// ---------------------------------------------------------------------------
// Mollow-style sidebands of a strongly driven line
// ---------------------------------------------------------------------------

/// Strong cw drive of a two-level line; the population transient rings at
/// the generalized Rabi frequency √(Ω² + Δ²).
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MollowConfig {
    /// On-resonance Rabi frequency, rad/s.
    pub rabi: f64,
    /// Radiative decay rate, 1/s.
    pub gamma_rad: f64,
    /// Laser detunings to sweep, rad/s.
    pub detunings: Vec<f64>,
    /// Sample spacing of the recorded transient, s.
    pub dt: f64,
    /// Number of samples (a power of two keeps the FFT exact).
    pub samples: usize,
    /// Spectral peaks below this frequency are ignored (DC lobe guard), Hz.
    pub min_frequency: f64,
    /// Integrator tolerance.
    pub tol: f64,
}

impl Default for MollowConfig {
    fn default() -> Self {
        MollowConfig {
            rabi: TWO_PI * 1e9,
            gamma_rad: GAMMA_RAD_REF,
            detunings: vec![
                0.0,
                TWO_PI * 0.5e9,
                TWO_PI * 1.0e9,
                TWO_PI * 1.5e9,
                TWO_PI * 2.0e9,
            ],
            dt: 50e-12,
            samples: 4096,
            min_frequency: 0.4e9,
            tol: DEFAULT_TOL,
        }
    }
}

/// Spectrum of one detuning point.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MollowRun {
    /// Laser detuning, rad/s.
    pub detuning: f64,
    /// FFT frequency axis, Hz.
    pub frequencies: Vec<f64>,
    /// Spectral magnitudes of the population transient.
    pub magnitudes: Vec<f64>,
    /// Location of the strongest spectral peak above the guard, Hz.
    pub peak_hz: f64,
    /// Generalized Rabi frequency √(Ω² + Δ²)/2π, Hz.
    pub expected_hz: f64,
    /// FFT bin width, Hz.
    pub bin_hz: f64,
}

/// Outcome of [`run_mollow`].
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MollowResult {
    /// One spectrum per configured detuning.
    pub runs: Vec<MollowRun>,
}

/// Record the driven transient at each detuning and locate its sideband.
pub fn run_mollow(cfg: &MollowConfig) -> Result<MollowResult, SimError> {
    check_positive(cfg.rabi, "rabi")?;
    check_positive(cfg.gamma_rad, "gamma_rad")?;
    check_positive(cfg.dt, "dt")?;
    check_positive(cfg.min_frequency, "min_frequency")?;
    check_positive(cfg.tol, "tol")?;
    if cfg.samples < 64 {
        return Err(SimError::InvalidParameter(
            "samples must be at least 64".into(),
        ));
    }
    if cfg.detunings.is_empty() || cfg.detunings.iter().any(|d| !d.is_finite()) {
        return Err(SimError::InvalidParameter(
            "detunings must be non-empty and finite".into(),
        ));
    }

    let t_eval: Vec<f64> = (0..cfg.samples).map(|i| i as f64 * cfg.dt).collect();
    let rho0 = density_from_level(2, 0);
    let mut runs = Vec::with_capacity(cfg.detunings.len());
    for &delta in &cfg.detunings {
        let mut h0 = CMat::zeros(2, 2);
        h0[(1, 1)] = c(delta, 0.0);
        let mut sys = LevelSystem::new(h0);
        sys.drives.push(Drive::cw(basis_matrix(2, 1, 0), cfg.rabi));
        sys.channels
            .push(CollapseChannel::radiative(basis_matrix(2, 0, 1), cfg.gamma_rad));
        let traj = evolve(&sys, &rho0, &t_eval, cfg.tol)?;
        let (frequencies, magnitudes) =
            spectrum_of_trace(&traj, TraceObservable::Population(1))?;

        let mut peak_hz = 0.0;
        let mut peak_mag = f64::NEG_INFINITY;
        for (f, m) in frequencies.iter().zip(&magnitudes) {
            if *f >= cfg.min_frequency && *m > peak_mag {
                peak_mag = *m;
                peak_hz = *f;
            }
        }
        let bin_hz = if frequencies.len() > 1 {
            frequencies[1] - frequencies[0]
        } else {
            0.0
        };
        runs.push(MollowRun {
            detuning: delta,
            frequencies,
            magnitudes,
            peak_hz,
            expected_hz: fmath::hypot(cfg.rabi, delta) / TWO_PI,
            bin_hz,
        });
    }
    Ok(MollowResult { runs })
}
