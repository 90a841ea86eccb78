//! Acceptance gate: one test per published result the library must
//! reproduce, each emitting a single `criterion NN PASS` line with the
//! measured values (run with `--nocapture --test-threads=1` for an ordered
//! report). A failing criterion panics with a matching FAIL line.

use std::path::Path;
use std::process::Command;

use sivsim_core::constants::TWO_PI;
use sivsim_core::dynamics::{
    basis_matrix, density_from_level, evolve, CollapseChannel, Drive, LevelSystem, DEFAULT_TOL,
};
use sivsim_core::eigen::eigh;
use sivsim_core::fit::{fit_damped_sinusoid, fit_exponential, fit_lorentzian_sum};
use sivsim_core::matrix::CMat;
use sivsim_core::phonon::{self, RateMode};
use sivsim_core::photophysics::{analyze, FocusModel, PulseTrain};
use sivsim_core::protocols::{
    cpt_power_for_isolated_broadening, run_cpt_scan, run_mollow, run_mw_rabi, run_mw_ramsey,
    run_odmr_scan, run_optical_pumping_t1, run_optical_rabi, run_optical_ramsey, run_raman_rabi,
    run_raman_ramsey, CptConfig, ExcitedBranch, MollowConfig, MwConfig, MwRamseyConfig,
    OdmrConfig, OpticalPumpingConfig, OpticalRabiConfig, OpticalRamseyConfig, RamanRabiConfig,
    RamanRamseyConfig,
};
use sivsim_core::spectrum::{
    build_excited_hamiltonian, build_ground_hamiltonian, eigensystem, transition_table,
    MagneticField, SivParameters,
};

const GHZ: f64 = 1e9;

fn check(number: u32, ok: bool, detail: String) {
    if ok {
        println!("criterion {number:02} PASS — {detail}");
    } else {
        panic!("criterion {number:02} FAIL — {detail}");
    }
}

fn rel_err(x: f64, want: f64) -> f64 {
    (x - want).abs() / want.abs()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

fn table_at(axis: [f64; 3], tesla: f64) -> sivsim_core::spectrum::TransitionTable {
    let p = SivParameters::default();
    let f = if tesla == 0.0 {
        MagneticField::zero()
    } else {
        MagneticField::along(axis, tesla).unwrap()
    };
    let gs = eigensystem(&build_ground_hamiltonian(&p, &f, false).unwrap()).unwrap();
    let es = eigensystem(&build_excited_hamiltonian(&p, &f, false).unwrap()).unwrap();
    transition_table(&gs, &es, &p).unwrap()
}

#[test]
fn c01_zero_field_level_structure() {
    let table = table_at([0.0, 0.0, 1.0], 0.0);
    let freqs: Vec<f64> = table.entries.iter().map(|e| e.frequency).collect();
    let spacings = [
        freqs[0] - freqs[1],
        freqs[1] - freqs[2],
        freqs[2] - freqs[3],
    ];
    let want = [48.0 * GHZ, 211.0 * GHZ, 48.0 * GHZ];
    let worst = spacings
        .iter()
        .zip(&want)
        .map(|(s, w)| rel_err(*s, *w))
        .fold(0.0, f64::max);
    check(
        1,
        table.entries.len() == 4 && worst < 1e-6,
        format!(
            "4 zero-field lines, spacings {:.3}/{:.3}/{:.3} GHz (worst rel err {worst:.2e})",
            spacings[0] / GHZ,
            spacings[1] / GHZ,
            spacings[2] / GHZ
        ),
    );
}

#[test]
fn c02_sixteen_line_rule() {
    let table_001 = table_at([0.0, 0.0, 1.0], 4.0);
    let min_001 = table_001
        .entries
        .iter()
        .map(|e| e.rel_intensity)
        .fold(f64::INFINITY, f64::min);
    let all_bright = table_001.entries.len() == 16 && min_001 > 1e-4;

    let table_111 = table_at([1.0, 1.0, 1.0], 4.0);
    let dark: Vec<f64> = table_111
        .entries
        .iter()
        .map(|e| e.rel_intensity)
        .filter(|i| *i < 0.4)
        .collect();
    let max_dark = dark.iter().copied().fold(0.0, f64::max);
    let spin_flips_dark = dark.len() == 8 && max_dark < 1e-8;

    check(
        2,
        all_bright && spin_flips_dark,
        format!(
            "B=4T(001): 16 lines, min intensity {min_001:.3e}; B||(111): 8 spin-flip lines, max {max_dark:.2e}"
        ),
    );
}

#[test]
fn c03_phonon_calibration_round_trip() {
    let delta = TWO_PI * 48.0 * GHZ;
    let model = phonon::calibrate(delta, 5.0, 39e-9, RateMode::AsWritten).unwrap();
    let t1 = phonon::orbital_t1(&model, delta, 5.0).unwrap();
    let err = rel_err(t1, 39e-9);
    check(
        3,
        err < 1e-9,
        format!("calibrated T1 round-trip = {:.6} ns (rel err {err:.2e})", t1 / 1e-9),
    );
}

#[test]
fn c04_optical_pumping_t1() {
    let out = run_optical_pumping_t1(&OpticalPumpingConfig::default()).unwrap();
    let err = rel_err(out.t1, 39e-9);
    check(
        4,
        err < 0.05,
        format!("fitted orbital T1 = {:.2} ns (target 39 ns, rel err {err:.3})", out.t1 / 1e-9),
    );
}

#[test]
fn c05_cpt_decomposition() {
    let mut cfg = CptConfig::default();
    cfg.rabi = cpt_power_for_isolated_broadening(&cfg, 3.6e6).unwrap();
    let out = run_cpt_scan(&cfg).unwrap();
    let err = rel_err(out.fwhm_hz, 12.1e6);
    check(
        5,
        err < 0.10,
        format!(
            "dip FWHM = {:.2} MHz at drive {:.2} MHz (target 12.1 MHz, rel err {err:.3})",
            out.fwhm_hz / 1e6,
            cfg.rabi / TWO_PI / 1e6
        ),
    );
}

#[test]
fn c06_odmr_hyperfine_splitting() {
    let out = run_odmr_scan(&OdmrConfig::default()).unwrap();
    let splitting = out.splitting_hz.expect("two hyperfine lines resolved");
    let err_hz = (splitting - 70e6).abs();
    check(
        6,
        err_hz < 1e6,
        format!("hyperfine doublet splitting = {:.2} MHz (target 70 +/- 1 MHz)", splitting / 1e6),
    );
}

#[test]
fn c07_mw_rabi_and_ramsey() {
    let rabi = run_mw_rabi(&MwConfig::default(), &linspace(0.0, 400e-9, 161)).unwrap();
    let rabi_err = rel_err(rabi.frequency_hz, 15e6);

    let ramsey = run_mw_ramsey(&MwRamseyConfig::default()).unwrap();
    let t2_dev = (ramsey.t2_star - 133e-9).abs() / 133e-9;

    check(
        7,
        rabi_err < 0.02 && t2_dev <= 0.25,
        format!(
            "Rabi = {:.3} MHz (rel err {rabi_err:.4}); T2* = {:.1} ns ({:.0}% from 2*T1 = 133 ns)",
            rabi.frequency_hz / 1e6,
            ramsey.t2_star / 1e-9,
            t2_dev * 100.0
        ),
    );
}

#[test]
fn c08_optical_rabi_ten_pi() {
    let out = run_optical_rabi(&OpticalRabiConfig::default()).unwrap();
    check(
        8,
        out.peak_values.len() == 5 && out.visibility_loss < 0.02,
        format!(
            "{} oscillation maxima to 10 pi, visibility loss {:.3}%",
            out.peak_values.len(),
            out.visibility_loss * 100.0
        ),
    );
}

#[test]
fn c09_optical_ramsey_branch_coherence() {
    let lower = run_optical_ramsey(&OpticalRamseyConfig::default()).unwrap();
    let upper = run_optical_ramsey(&OpticalRamseyConfig::for_branch(ExcitedBranch::Upper)).unwrap();
    let err_lo = rel_err(lower.t2_star, 1044e-12);
    let err_up = rel_err(upper.t2_star, 398e-12);
    check(
        9,
        err_lo < 0.10 && err_up < 0.10,
        format!(
            "lower branch T2* = {:.0} ps (target 1044), upper = {:.0} ps (target 398)",
            lower.t2_star / 1e-12,
            upper.t2_star / 1e-12
        ),
    );
}

#[test]
fn c10_raman_fringe_and_effective_rabi() {
    let ramsey = run_raman_ramsey(&RamanRamseyConfig::default()).unwrap();
    let fringe_err = rel_err(ramsey.fringe_hz, 48.0 * GHZ);

    // Default Raman drive sits exactly at delta/omega = 50.
    let cfg = RamanRabiConfig::default();
    assert_eq!(cfg.delta / cfg.omega, 50.0);
    let rabi = run_raman_rabi(&cfg).unwrap();
    let eff_err = rel_err(rabi.omega_eff_hz, rabi.omega_formula_hz);

    check(
        10,
        fringe_err < 0.005 && eff_err < 0.05,
        format!(
            "Ramsey fringe = {:.3} GHz (rel err {fringe_err:.4}); effective Rabi {:.3} MHz vs formula {:.3} MHz (rel err {eff_err:.3})",
            ramsey.fringe_hz / GHZ,
            rabi.omega_eff_hz / 1e6,
            rabi.omega_formula_hz / 1e6
        ),
    );
}

#[test]
fn c11_mollow_sideband_positions() {
    let out = run_mollow(&MollowConfig::default()).unwrap();
    let mut worst_bins = 0.0f64;
    for run in &out.runs {
        worst_bins = worst_bins.max((run.peak_hz - run.expected_hz).abs() / run.bin_hz);
    }
    check(
        11,
        out.runs.len() >= 5 && worst_bins <= 1.0,
        format!(
            "{} detunings, worst sideband offset {worst_bins:.2} bins (bin = {:.1} MHz)",
            out.runs.len(),
            out.runs[0].bin_hz / 1e6
        ),
    );
}

#[test]
fn c12_photophysics_chain() {
    let res = analyze(
        817e-9,
        &PulseTrain::default(),
        &FocusModel::default(),
        sivsim_core::constants::C_LIGHT / 737e-9,
        1.85e-9,
    )
    .unwrap();
    let mu_err = rel_err(res.mu_debye, 14.3);
    let tau_err = rel_err(res.tau0, 6.24e-9);
    let phi_dev = (res.phi - 0.296).abs();
    check(
        12,
        mu_err < 0.02 && tau_err < 0.01 && phi_dev < 0.005,
        format!(
            "mu = {:.3} D, tau0 = {:.3} ns, Phi = {:.1}%",
            res.mu_debye,
            res.tau0 / 1e-9,
            res.phi * 100.0
        ),
    );
}

#[test]
fn c13_property_suites() {
    // Driven, damped two-level evolution: trace, Hermiticity, positivity.
    let gamma = 1.0 / 1.85e-9;
    let rabi = TWO_PI * 80e6;
    let mut sys = LevelSystem::new(CMat::zeros(2, 2));
    sys.drives.push(Drive::cw(basis_matrix(2, 1, 0), rabi));
    sys.channels
        .push(CollapseChannel::radiative(basis_matrix(2, 0, 1), gamma));
    let times = linspace(0.0, 50e-9, 201);
    let traj = evolve(&sys, &density_from_level(2, 0), &times, DEFAULT_TOL).unwrap();
    let mut trace_drift = 0.0f64;
    let mut herm_defect = 0.0f64;
    let mut min_eig = f64::INFINITY;
    for rho in &traj.rho {
        trace_drift = trace_drift.max((rho.trace().re - 1.0).abs());
        herm_defect = herm_defect.max(rho.hermiticity_defect());
        let eigs = eigh(rho).unwrap();
        min_eig = min_eig.min(eigs.energies[0]);
    }
    let lindblad_ok = trace_drift < 1e-9 && herm_defect < 1e-9 && min_eig > -1e-7;

    // Closed-form checks: resonant Rabi flopping and pure exponential decay.
    let coherent = {
        let mut s = LevelSystem::new(CMat::zeros(2, 2));
        s.drives.push(Drive::cw(basis_matrix(2, 1, 0), rabi));
        s
    };
    let t_rabi = linspace(0.0, 3.0 * TWO_PI / rabi, 61);
    let flop = evolve(&coherent, &density_from_level(2, 0), &t_rabi, DEFAULT_TOL).unwrap();
    let mut rabi_err = 0.0f64;
    for (k, t) in flop.times.iter().enumerate() {
        rabi_err = rabi_err.max((flop.populations[k][1] - (0.5 * rabi * t).sin().powi(2)).abs());
    }
    let decaying = {
        let mut s = LevelSystem::new(CMat::zeros(2, 2));
        s.channels
            .push(CollapseChannel::radiative(basis_matrix(2, 0, 1), gamma));
        s
    };
    let t_dec = linspace(0.0, 10e-9, 41);
    let decay = evolve(&decaying, &density_from_level(2, 1), &t_dec, DEFAULT_TOL).unwrap();
    let mut decay_err = 0.0f64;
    for (k, t) in decay.times.iter().enumerate() {
        decay_err = decay_err.max((decay.populations[k][1] - (-gamma * t).exp()).abs());
    }
    let analytic_ok = rabi_err < 1e-6 && decay_err < 1e-6;

    // Fit recovery on noiseless synthetic data for all three model families.
    let xs = linspace(0.0, 400e-9, 161);
    let expo: Vec<f64> = xs.iter().map(|x| 0.8 * (-x / 39e-9).exp() + 0.1).collect();
    let f_expo = fit_exponential(&xs, &expo, None).unwrap();
    let mut fit_err = rel_err(f_expo.params[1], 39e-9);

    let sin: Vec<f64> = xs
        .iter()
        .map(|x| 0.5 * (-x / 112e-9).exp() * (TWO_PI * 25e6 * x + 0.3).cos() + 0.5)
        .collect();
    let f_sin = fit_damped_sinusoid(&xs, &sin, None).unwrap();
    fit_err = fit_err
        .max(rel_err(f_sin.params[1], 112e-9))
        .max(rel_err(f_sin.params[2], 25e6));

    let fx = linspace(-60e6, 60e6, 241);
    let lor: Vec<f64> = fx
        .iter()
        .map(|x| {
            let hw = 6e6_f64 / 2.0;
            1.0 - 0.4 * hw * hw / (x * x + hw * hw)
        })
        .collect();
    let f_lor = fit_lorentzian_sum(&fx, &lor, Some(&[1.0, -0.4, 0.0, 6e6])).unwrap();
    fit_err = fit_err.max(rel_err(f_lor.params[3], 6e6));
    let fits_ok = fit_err < 1e-6;

    check(
        13,
        lindblad_ok && analytic_ok && fits_ok,
        format!(
            "trace drift {trace_drift:.1e}, Hermiticity defect {herm_defect:.1e}, min eigenvalue {min_eig:.1e}, analytic errors {:.1e}/{:.1e}, fit recovery {fit_err:.1e}",
            rabi_err, decay_err
        ),
    );
}

#[test]
fn c14_determinism() {
    let configs = [
        ("spectrum", "command = spectrum\n[params]\nfield.magnitude = 4 T\n"),
        ("zeeman", "command = zeeman-map\n[params]\nsteps = 9\n"),
        (
            "rates",
            "command = rates\n[params]\ntemp.start = 1 K\ntemp.stop = 10 K\ntemp.points = 19\n",
        ),
        (
            "cpt",
            "command = protocol\n[params]\nvariant = cpt_scan\npower_target = 3.6 MHz\n[output]\nformat = json\n",
        ),
        ("photo", "command = photophysics\n"),
        (
            "sweep",
            "command = spectrum\n[sweep]\nkey = field.magnitude\nvalues = 1 T, 2 T, 3 T\n",
        ),
    ];
    let base = tempfile::TempDir::new().unwrap();
    let mut identical = true;
    let mut total = 0usize;
    for (name, text) in &configs {
        let cfg_path = base.path().join(format!("{name}.cfg"));
        std::fs::write(&cfg_path, text).unwrap();
        let mut passes: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
        for pass in 0..2 {
            let out_dir = base.path().join(format!("{name}_{pass}"));
            let status = Command::new(env!("CARGO_BIN_EXE_sivsim"))
                .arg("--config")
                .arg(&cfg_path)
                .arg("--out")
                .arg(&out_dir)
                .args(["--jobs", "2"])
                .status()
                .unwrap();
            assert!(status.success(), "{name} run failed");
            passes.push(read_artifacts(&out_dir));
        }
        total += passes[0].len();
        identical &= passes[0] == passes[1];
    }
    check(
        14,
        identical,
        format!("{total} artifacts across {} configs byte-identical on re-run", configs.len()),
    );
}

fn read_artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}
