//! Fine structure of the SiV- center: effective Hamiltonians of the ground
//! and excited orbital doublets, their eigensystems, and the optical
//! transition table (with magnetic-field maps).
//!
//! Each electronic manifold is a spin-orbit-split orbital doublet carrying a
//! spin 1/2, treated in the product basis {e+, e-} ⊗ {up, down} (optionally
//! ⊗ a nuclear spin 1/2). The model Hamiltonian per manifold is
//!
//! ```text
//! H = s·(λ/2)·L_z⊗σ_z + α·Σ_x + β·Σ_y
//!     + (μ_B/ħ)·(g_spin·B·S + f_orbital·B_z'·L_z)  [+ 2π·A_par·S_z·I_z]
//! ```
//!
//! with `L_z = diag(+1, -1)` on the orbital factor, transverse strain
//! components (α, β), and the magnetic field decomposed in the defect frame
//! whose z' axis is the (1,1,1)/√3 high-symmetry direction. The branch sign
//! `s` defaults to -1 in both manifolds (aligned orbital and spin momenta in
//! the lower branch) and can be overridden per manifold.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::constants::{C_LIGHT, HBAR, MU_B, TWO_PI};
use crate::eigen::{eigh, EigenSystem};
use crate::error::SimError;
use crate::matrix::{c, CMat, C_ONE, C_ZERO};

/// High-symmetry axis of the defect, (1,1,1)/√3, in crystal coordinates.
pub const SIV_AXIS: [f64; 3] = [0.577_350_269_189_625_7; 3];
/// Defect-frame x' axis, (1,-1,0)/√2.
const SIV_X: [f64; 3] = [core::f64::consts::FRAC_1_SQRT_2, -core::f64::consts::FRAC_1_SQRT_2, 0.0];
/// Defect-frame y' axis, (1,1,-2)/√6.
const SIV_Y: [f64; 3] = [0.408_248_290_463_863, 0.408_248_290_463_863, -0.816_496_580_927_726];

/// Nominal zero-phonon-line wavelength used for the default optical
/// frequency, meters.
pub const ZPL_WAVELENGTH: f64 = 737e-9;

/// Physical parameters of a single SiV- center.
///
/// Angular quantities (`lambda_*`, `strain_*`) are in rad/s; `hyperfine_apar`
/// and `nu0` are plain frequencies in Hz; `gamma_rad` is a rate in 1/s.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SivParameters {
    /// Ground-state spin-orbit splitting, rad/s.
    pub lambda_g: f64,
    /// Excited-state spin-orbit splitting, rad/s.
    pub lambda_e: f64,
    /// Ground-state transverse strain (alpha, beta), rad/s.
    pub strain_g: (f64, f64),
    /// Excited-state transverse strain (alpha, beta), rad/s.
    pub strain_e: (f64, f64),
    /// Electron spin g-factor.
    pub g_spin: f64,
    /// Orbital Zeeman quenching factor on the L_z term.
    pub f_orbital: f64,
    /// Spin-orbit branch sign of the ground manifold, +1 or -1.
    pub so_sign_g: f64,
    /// Spin-orbit branch sign of the excited manifold, +1 or -1.
    pub so_sign_e: f64,
    /// Parallel hyperfine constant for a 29Si nucleus, Hz.
    pub hyperfine_apar: f64,
    /// Optical frequency of the unsplit zero-phonon line, Hz.
    pub nu0: f64,
    /// Total radiative decay rate of the excited state, 1/s.
    pub gamma_rad: f64,
}

impl Default for SivParameters {
    fn default() -> Self {
        SivParameters {
            lambda_g: TWO_PI * 48e9,
            lambda_e: TWO_PI * 259e9,
            strain_g: (0.0, 0.0),
            strain_e: (0.0, 0.0),
            g_spin: 2.0,
            f_orbital: 0.1,
            so_sign_g: -1.0,
            so_sign_e: -1.0,
            hyperfine_apar: 70e6,
            nu0: C_LIGHT / ZPL_WAVELENGTH,
            gamma_rad: 1.0 / 1.85e-9,
        }
    }
}

impl SivParameters {
    /// Check the parameter invariants, naming the offending field on error.
    pub fn validate(&self) -> Result<(), SimError> {
        let finite = [
            ("lambda_g", self.lambda_g),
            ("lambda_e", self.lambda_e),
            ("strain_g.alpha", self.strain_g.0),
            ("strain_g.beta", self.strain_g.1),
            ("strain_e.alpha", self.strain_e.0),
            ("strain_e.beta", self.strain_e.1),
            ("g_spin", self.g_spin),
            ("f_orbital", self.f_orbital),
            ("so_sign_g", self.so_sign_g),
            ("so_sign_e", self.so_sign_e),
            ("hyperfine_apar", self.hyperfine_apar),
            ("nu0", self.nu0),
            ("gamma_rad", self.gamma_rad),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(SimError::InvalidParameter(format!("{name} is not finite")));
            }
        }
        if self.lambda_g <= 0.0 {
            return Err(SimError::InvalidParameter("lambda_g must be > 0".into()));
        }
        if self.lambda_e <= self.lambda_g {
            return Err(SimError::InvalidParameter(
                "lambda_e must exceed lambda_g".into(),
            ));
        }
        if self.gamma_rad <= 0.0 {
            return Err(SimError::InvalidParameter("gamma_rad must be > 0".into()));
        }
        if self.nu0 <= 0.0 {
            return Err(SimError::InvalidParameter("nu0 must be > 0".into()));
        }
        for (name, s) in [("so_sign_g", self.so_sign_g), ("so_sign_e", self.so_sign_e)] {
            if (crate::fmath::abs(s) - 1.0).abs() > 1e-12 {
                return Err(SimError::InvalidParameter(format!("{name} must be +1 or -1")));
            }
        }
        Ok(())
    }
}

/// Static magnetic field in crystal coordinates (Tesla).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MagneticField {
    /// Cartesian components in the crystal frame.
    pub b: [f64; 3],
}

impl MagneticField {
    /// No applied field.
    pub const fn zero() -> Self {
        MagneticField { b: [0.0; 3] }
    }

    /// Field of magnitude `tesla` along `axis` (normalized internally).
    pub fn along(axis: [f64; 3], tesla: f64) -> Result<Self, SimError> {
        let norm = crate::fmath::sqrt(axis.iter().map(|v| v * v).sum());
        if !norm.is_finite() || norm == 0.0 {
            return Err(SimError::InvalidParameter(
                "field axis must be a finite nonzero vector".into(),
            ));
        }
        if !tesla.is_finite() {
            return Err(SimError::InvalidParameter(
                "field magnitude must be finite".into(),
            ));
        }
        Ok(MagneticField {
            b: [
                axis[0] / norm * tesla,
                axis[1] / norm * tesla,
                axis[2] / norm * tesla,
            ],
        })
    }

    /// Field magnitude, Tesla.
    pub fn magnitude(&self) -> f64 {
        crate::fmath::sqrt(self.b.iter().map(|v| v * v).sum())
    }

    /// Components (B_x', B_y', B_z') in the defect frame.
    pub fn siv_components(&self) -> [f64; 3] {
        let dot = |axis: [f64; 3]| axis[0] * self.b[0] + axis[1] * self.b[1] + axis[2] * self.b[2];
        [dot(SIV_X), dot(SIV_Y), dot(SIV_AXIS)]
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(SimError::InvalidParameter(
                "magnetic field components must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// One electronic manifold: its Hamiltonian and basis bookkeeping.
#[derive(Debug, Clone)]
pub struct Manifold {
    /// Hamiltonian in angular-frequency units (rad/s), dimension 4 (or 8
    /// with the nuclear spin).
    pub h: CMat,
    /// Whether the 29Si nuclear spin is included.
    pub nuclear: bool,
}

impl Manifold {
    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.h.rows()
    }

    /// Ordered basis labels; the electronic order {e+ up, e+ dn, e- up,
    /// e- dn} is fixed, with the nuclear projection appended when enabled.
    pub fn basis_labels(&self) -> Vec<String> {
        let electronic = ["e+_up", "e+_dn", "e-_up", "e-_dn"];
        if self.nuclear {
            let mut out = Vec::with_capacity(8);
            for e in electronic {
                for n in ["Iup", "Idn"] {
                    out.push(format!("{e}_{n}"));
                }
            }
            out
        } else {
            electronic.iter().map(|s| String::from(*s)).collect()
        }
    }
}

fn pauli_x() -> CMat {
    CMat::from_rows(&[&[C_ZERO, C_ONE], &[C_ONE, C_ZERO]])
}

fn pauli_y() -> CMat {
    CMat::from_rows(&[&[C_ZERO, c(0.0, -1.0)], &[c(0.0, 1.0), C_ZERO]])
}

fn pauli_z() -> CMat {
    CMat::diag_real(&[1.0, -1.0])
}

fn build_manifold(
    lambda: f64,
    strain: (f64, f64),
    so_sign: f64,
    params: &SivParameters,
    field: &MagneticField,
    nuclear: bool,
) -> Result<Manifold, SimError> {
    params.validate()?;
    field.validate()?;
    let i2 = CMat::identity(2);
    let (alpha, beta) = strain;
    let [bx, by, bz] = field.siv_components();

    // Electronic part on the 4-dimensional orbital ⊗ spin space.
    let mut h = pauli_z().kron(&pauli_z()).scale_re(so_sign * lambda / 2.0);
    h.add_scaled(c(alpha, 0.0), &pauli_x().kron(&i2));
    h.add_scaled(c(beta, 0.0), &pauli_y().kron(&i2));
    let zeeman = MU_B / HBAR;
    h.add_scaled(
        c(zeeman * params.g_spin * 0.5, 0.0),
        &i2.kron(&pauli_x()).scale_re(bx)
            .add(&i2.kron(&pauli_y()).scale_re(by))
            .add(&i2.kron(&pauli_z()).scale_re(bz)),
    );
    h.add_scaled(
        c(zeeman * params.f_orbital * bz, 0.0),
        &pauli_z().kron(&i2),
    );

    if nuclear {
        // Extend by the nuclear spin and add the secular hyperfine coupling
        // 2π·A_par·S_z·I_z.
        let mut full = h.kron(&i2);
        let sz_iz = CMat::identity(2)
            .kron(&pauli_z())
            .kron(&pauli_z())
            .scale_re(0.25);
        full.add_scaled(c(TWO_PI * params.hyperfine_apar, 0.0), &sz_iz);
        h = full;
    }
    Ok(Manifold { h, nuclear })
}

/// Effective ground-manifold Hamiltonian for the given field.
pub fn build_ground_hamiltonian(
    params: &SivParameters,
    field: &MagneticField,
    nuclear: bool,
) -> Result<Manifold, SimError> {
    build_manifold(
        params.lambda_g,
        params.strain_g,
        params.so_sign_g,
        params,
        field,
        nuclear,
    )
}

/// Effective excited-manifold Hamiltonian for the given field.
pub fn build_excited_hamiltonian(
    params: &SivParameters,
    field: &MagneticField,
    nuclear: bool,
) -> Result<Manifold, SimError> {
    build_manifold(
        params.lambda_e,
        params.strain_e,
        params.so_sign_e,
        params,
        field,
        nuclear,
    )
}

/// Diagonalize a manifold (ascending energies, orthonormal states, fixed
/// phase convention).
pub fn eigensystem(m: &Manifold) -> Result<EigenSystem, SimError> {
    eigh(&m.h)
}

/// One optical line between a ground and an excited eigenstate (or a merged
/// group of degenerate such lines).
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TransitionEntry {
    /// 0-based index into the ground eigensystem (for merged lines, the
    /// strongest contributing pair).
    pub ground_index: usize,
    /// 0-based index into the excited eigensystem (for merged lines, the
    /// strongest contributing pair).
    pub excited_index: usize,
    /// Absolute optical frequency, Hz.
    pub frequency: f64,
    /// Intensity relative to the strongest line, in [0, 1].
    pub rel_intensity: f64,
    /// Conventional name: excited-state letter (A.. ascending in energy)
    /// plus 1-based ground-state number, e.g. "D2"; fully merged zero-field
    /// tables use the plain line letters A..D descending in frequency.
    pub label: String,
}

/// Optical transition table, sorted by descending frequency.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TransitionTable {
    /// Lines after degeneracy merging and peak normalization.
    pub entries: Vec<TransitionEntry>,
}

/// Lines closer than this (Hz) are merged into one entry.
pub const MERGE_TOLERANCE_HZ: f64 = 1e6;

/// Build the optical transition table between two manifold eigensystems.
///
/// Intensities follow an orbital-blind dipole model: the optical dipole is
/// taken with unit strength on every orbital channel and the identity on the
/// spin (and nuclear) factor, with polarization channels summed
/// incoherently, so a line's strength reduces to the spin-overlap of the
/// eigenstates involved. Lines within [`MERGE_TOLERANCE_HZ`] are merged
/// (intensities summed), and intensities are normalized so the strongest
/// line is 1.
pub fn transition_table(
    gs: &EigenSystem,
    es: &EigenSystem,
    params: &SivParameters,
) -> Result<TransitionTable, SimError> {
    params.validate()?;
    let dim = gs.dim();
    if es.dim() != dim {
        return Err(SimError::InvalidParameter(format!(
            "eigensystem dimensions differ: ground {dim}, excited {}",
            es.dim()
        )));
    }
    if dim % 2 != 0 || dim < 4 {
        return Err(SimError::InvalidParameter(format!(
            "transition table needs an orbital-doublet space, got dimension {dim}"
        )));
    }

    // Raw line strengths: sum over the four elementary orbital channels
    // |a><b| ⊗ 1 of |<e_i| D |g_j>|^2.
    let spin_dim = dim / 2;
    let ispin = CMat::identity(spin_dim);
    let mut raw = alloc::vec![0.0f64; dim * dim];
    for a in 0..2 {
        for b in 0..2 {
            let mut p = CMat::zeros(2, 2);
            p[(a, b)] = C_ONE;
            let d = p.kron(&ispin);
            let amp = es.states.adjoint().mul(&d).mul(&gs.states);
            for i in 0..dim {
                for j in 0..dim {
                    raw[i * dim + j] += amp[(i, j)].norm_sqr();
                }
            }
        }
    }

    struct RawLine {
        e: usize,
        g: usize,
        freq: f64,
        strength: f64,
    }
    let mut lines: Vec<RawLine> = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            lines.push(RawLine {
                e: i,
                g: j,
                freq: params.nu0 + (es.energies[i] - gs.energies[j]) / TWO_PI,
                strength: raw[i * dim + j],
            });
        }
    }
    lines.sort_by(|a, b| a.freq.partial_cmp(&b.freq).unwrap());

    // Merge lines separated by less than the tolerance.
    struct Group {
        freq_sum: f64,
        strength: f64,
        members: usize,
        rep_e: usize,
        rep_g: usize,
        rep_strength: f64,
        last_freq: f64,
    }
    let mut groups: Vec<Group> = Vec::new();
    for line in lines {
        let start_new = match groups.last() {
            Some(g) => line.freq - g.last_freq >= MERGE_TOLERANCE_HZ,
            None => true,
        };
        if start_new {
            groups.push(Group {
                freq_sum: line.freq,
                strength: line.strength,
                members: 1,
                rep_e: line.e,
                rep_g: line.g,
                rep_strength: line.strength,
                last_freq: line.freq,
            });
        } else {
            let g = groups.last_mut().unwrap();
            g.freq_sum += line.freq;
            g.strength += line.strength;
            g.members += 1;
            g.last_freq = line.freq;
            let better = line.strength > g.rep_strength
                || (line.strength == g.rep_strength
                    && (line.e, line.g) < (g.rep_e, g.rep_g));
            if better {
                g.rep_e = line.e;
                g.rep_g = line.g;
                g.rep_strength = line.strength;
            }
        }
    }

    let peak = groups
        .iter()
        .map(|g| g.strength)
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);

    // Fully collapsed zero-field pattern: exactly four lines, each merging a
    // complete set of doublet pairs. Those get the conventional A..D letters
    // in descending frequency; everything else is named by its strongest
    // (excited, ground) pair.
    let fully_collapsed = groups.len() == 4 && groups.iter().all(|g| g.members == dim);

    let mut entries: Vec<TransitionEntry> = groups
        .iter()
        .map(|g| TransitionEntry {
            ground_index: g.rep_g,
            excited_index: g.rep_e,
            frequency: g.freq_sum / g.members as f64,
            rel_intensity: g.strength / peak,
            label: String::new(),
        })
        .collect();
    entries.sort_by(|a, b| b.frequency.partial_cmp(&a.frequency).unwrap());
    for (k, entry) in entries.iter_mut().enumerate() {
        entry.label = if fully_collapsed {
            String::from_utf8(alloc::vec![b'A' + k as u8]).unwrap()
        } else {
            pair_label(entry.excited_index, entry.ground_index)
        };
    }
    Ok(TransitionTable { entries })
}

/// Conventional name of the (excited, ground) line: letter for the excited
/// state (A.. ascending in energy), 1-based number for the ground state.
fn pair_label(excited_index: usize, ground_index: usize) -> String {
    format!(
        "{}{}",
        char::from(b'A' + excited_index as u8),
        ground_index + 1
    )
}

/// Transition tables along a magnetic-field ramp from 0 to `b_max` Tesla in
/// `steps` evenly spaced points (endpoints included).
pub fn zeeman_map(
    params: &SivParameters,
    field_axis: [f64; 3],
    b_max: f64,
    steps: usize,
) -> Result<Vec<(f64, TransitionTable)>, SimError> {
    if steps < 2 {
        return Err(SimError::InvalidParameter(
            "zeeman_map needs at least 2 steps".into(),
        ));
    }
    if !b_max.is_finite() || b_max < 0.0 {
        return Err(SimError::InvalidParameter(
            "b_max must be finite and non-negative".into(),
        ));
    }
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let b = b_max * k as f64 / (steps - 1) as f64;
        let field = MagneticField::along(field_axis, b)?;
        let gs = eigensystem(&build_ground_hamiltonian(params, &field, false)?)?;
        let es = eigensystem(&build_excited_hamiltonian(params, &field, false)?)?;
        out.push((b, transition_table(&gs, &es, params)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::TWO_PI;
    use proptest::prelude::*;

    const GHZ: f64 = 1e9;

    fn defaults() -> SivParameters {
        SivParameters::default()
    }

    fn field_001(tesla: f64) -> MagneticField {
        MagneticField::along([0.0, 0.0, 1.0], tesla).unwrap()
    }

    fn field_111(tesla: f64) -> MagneticField {
        MagneticField::along([1.0, 1.0, 1.0], tesla).unwrap()
    }

    #[test]
    fn zero_field_ground_doublets() {
        let m = build_ground_hamiltonian(&defaults(), &MagneticField::zero(), false).unwrap();
        let es = eigensystem(&m).unwrap();
        let split = es.energies[3] - es.energies[0];
        assert!((split - TWO_PI * 48.0 * GHZ).abs() < 1e-3);
        // Kramers doublets: pairwise degenerate.
        assert!((es.energies[1] - es.energies[0]).abs() < 1e-3);
        assert!((es.energies[3] - es.energies[2]).abs() < 1e-3);
    }

    #[test]
    fn zero_field_excited_doublets() {
        let m = build_excited_hamiltonian(&defaults(), &MagneticField::zero(), false).unwrap();
        let es = eigensystem(&m).unwrap();
        assert!((es.energies[3] - es.energies[0] - TWO_PI * 259.0 * GHZ).abs() < 1e-3);
    }

    #[test]
    fn matched_splittings_give_identical_spectra() {
        let mut p = defaults();
        p.lambda_e = p.lambda_g * (1.0 + 1e-12); // validator wants e > g
        let f = field_001(2.0);
        let g = eigensystem(&build_ground_hamiltonian(&p, &f, false).unwrap()).unwrap();
        let e = eigensystem(&build_excited_hamiltonian(&p, &f, false).unwrap()).unwrap();
        for (a, b) in g.energies.iter().zip(&e.energies) {
            assert!((a - b).abs() < 1.0);
        }
    }

    #[test]
    fn zero_field_commutes_with_spin_z() {
        let m = build_ground_hamiltonian(&defaults(), &MagneticField::zero(), false).unwrap();
        let sz = CMat::identity(2).kron(&pauli_z()).scale_re(0.5);
        let comm = crate::matrix::commutator(&m.h, &sz);
        assert_eq!(comm.max_abs(), 0.0);
    }

    #[test]
    fn ground_spectrum_at_3t_001_matches_oracle() {
        // Frozen from an independent diagonalization of the same model.
        let want = [
            -3.870_923_612_7e11,
            -2.001_841_264_7e11,
            2.306_477_826_9e11,
            3.566_287_050_5e11,
        ];
        let m = build_ground_hamiltonian(&defaults(), &field_001(3.0), false).unwrap();
        let es = eigensystem(&m).unwrap();
        for (got, want) in es.energies.iter().zip(&want) {
            assert!(
                (got - want).abs() < 1e-6 * want.abs(),
                "{got} vs {want}"
            );
        }
    }

    #[test]
    fn excited_spectrum_at_3t_001_matches_oracle() {
        let want = [
            -1.004_948_909_6e12,
            -6.803_191_166_7e11,
            7.107_827_728_8e11,
            9.744_852_533_9e11,
        ];
        let m = build_excited_hamiltonian(&defaults(), &field_001(3.0), false).unwrap();
        let es = eigensystem(&m).unwrap();
        for (got, want) in es.energies.iter().zip(&want) {
            assert!((got - want).abs() < 1e-6 * want.abs());
        }
    }

    #[test]
    fn aligned_field_gives_pure_spin_states() {
        let m = build_excited_hamiltonian(&defaults(), &field_111(3.0), false).unwrap();
        let es = eigensystem(&m).unwrap();
        let sz = CMat::identity(2).kron(&pauli_z()).scale_re(0.5);
        for k in 0..4 {
            let v = es.state(k);
            let exp: f64 = sz
                .mul_vec(&v)
                .iter()
                .zip(&v)
                .map(|(a, b)| (b.conj() * a).re)
                .sum();
            assert!((exp.abs() - 0.5).abs() < 1e-10, "state {k}: <Sz> = {exp}");
        }
    }

    #[test]
    fn zero_field_table_has_classic_four_lines() {
        let p = defaults();
        let f = MagneticField::zero();
        let gs = eigensystem(&build_ground_hamiltonian(&p, &f, false).unwrap()).unwrap();
        let es = eigensystem(&build_excited_hamiltonian(&p, &f, false).unwrap()).unwrap();
        let table = transition_table(&gs, &es, &p).unwrap();
        assert_eq!(table.entries.len(), 4);
        let freqs: alloc::vec::Vec<f64> =
            table.entries.iter().map(|e| e.frequency).collect();
        // Descending, offsets ±153.5 and ±105.5 GHz around nu0.
        let offsets = [153.5 * GHZ, 105.5 * GHZ, -105.5 * GHZ, -153.5 * GHZ];
        for (freq, off) in freqs.iter().zip(&offsets) {
            assert!((freq - p.nu0 - off).abs() < 1.0, "{freq} vs nu0+{off}");
        }
        // Adjacent spacings 48, 211, 48 GHz.
        assert!((freqs[0] - freqs[1] - 48.0 * GHZ).abs() < 1.0);
        assert!((freqs[1] - freqs[2] - 211.0 * GHZ).abs() < 1.0);
        assert!((freqs[2] - freqs[3] - 48.0 * GHZ).abs() < 1.0);
        let labels: alloc::vec::Vec<&str> =
            table.entries.iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, ["A", "B", "C", "D"]);
        // All four zero-field lines carry equal weight in this dipole model.
        for e in &table.entries {
            assert!((e.rel_intensity - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn misaligned_field_lights_up_all_sixteen_lines() {
        let p = defaults();
        let f = field_001(4.0);
        let gs = eigensystem(&build_ground_hamiltonian(&p, &f, false).unwrap()).unwrap();
        let es = eigensystem(&build_excited_hamiltonian(&p, &f, false).unwrap()).unwrap();
        let table = transition_table(&gs, &es, &p).unwrap();
        assert_eq!(table.entries.len(), 16);
        for e in &table.entries {
            assert!(e.rel_intensity > 0.0, "dark line {}", e.label);
        }
        // Frozen from the independent overlap computation: normalized
        // intensity by (excited, ground) index.
        let want = [
            [1.000_000_000_0, 0.750_488_028_9, 0.291_980_317_2, 0.042_468_346_1],
            [0.294_825_131_0, 0.655_022_530_8, 0.387_445_815_3, 0.747_643_215_1],
            [0.747_643_215_1, 0.387_445_815_3, 0.655_022_530_8, 0.294_825_131_0],
            [0.042_468_346_1, 0.291_980_317_2, 0.750_488_028_9, 1.000_000_000_0],
        ];
        for e in &table.entries {
            let w = want[e.excited_index][e.ground_index];
            assert!(
                (e.rel_intensity - w).abs() < 1e-8,
                "{}: {} vs {}",
                e.label,
                e.rel_intensity,
                w
            );
        }
        // Labels name the (excited, ground) pair: D2 is excited index 3,
        // ground index 1.
        let d2 = table.entries.iter().find(|e| e.label == "D2").unwrap();
        assert_eq!((d2.excited_index, d2.ground_index), (3, 1));
    }

    #[test]
    fn aligned_field_suppresses_spin_flips() {
        // With B ∥ (111) the spin Zeeman shift is common to both manifolds,
        // so the two spin-conserving lines of each orbital-diagonal pair
        // coincide exactly and merge: 16 raw lines → 14 entries, of which
        // the 8 spin-flip ones are dark.
        let p = defaults();
        let f = field_111(4.0);
        let gs = eigensystem(&build_ground_hamiltonian(&p, &f, false).unwrap()).unwrap();
        let es = eigensystem(&build_excited_hamiltonian(&p, &f, false).unwrap()).unwrap();
        let table = transition_table(&gs, &es, &p).unwrap();
        assert_eq!(table.entries.len(), 14);
        let mut merged_bright = 0;
        let mut single_bright = 0;
        let mut dark = 0;
        for e in &table.entries {
            if (e.rel_intensity - 1.0).abs() < 1e-12 {
                merged_bright += 1;
            } else if (e.rel_intensity - 0.5).abs() < 1e-12 {
                single_bright += 1;
            } else {
                assert!(e.rel_intensity < 1e-8, "unexpected weight {}", e.rel_intensity);
                dark += 1;
            }
        }
        assert_eq!((merged_bright, single_bright, dark), (2, 4, 8));
    }

    #[test]
    fn hyperfine_extends_dimension_and_splits_lines() {
        let p = defaults();
        let f = field_111(0.1);
        let g = build_ground_hamiltonian(&p, &f, true).unwrap();
        assert_eq!(g.dim(), 8);
        assert_eq!(g.basis_labels().len(), 8);
        let gs = eigensystem(&g).unwrap();
        let es =
            eigensystem(&build_excited_hamiltonian(&p, &f, true).unwrap()).unwrap();
        let table = transition_table(&gs, &es, &p).unwrap();
        assert!(table.entries.len() > 16);
    }

    #[test]
    fn zeeman_map_starts_at_zero_field_table() {
        let p = defaults();
        let map = zeeman_map(&p, [0.0, 0.0, 1.0], 2.0, 5).unwrap();
        assert_eq!(map.len(), 5);
        assert_eq!(map[0].0, 0.0);
        assert_eq!(map[0].1.entries.len(), 4);
        assert_eq!(map[4].0, 2.0);
        // Continuity: adjacent-step line shifts stay below the Zeeman scale
        // of the step (g·mu_B·ΔB/h plus orbital contribution).
        for w in map.windows(2) {
            let (b0, t0) = &w[0];
            let (b1, t1) = &w[1];
            let bound = 3.0 * (MU_B / HBAR) * (b1 - b0) / TWO_PI + 1.0;
            // Compare branch extremes (tables may differ in length).
            let hi0 = t0.entries.first().unwrap().frequency;
            let hi1 = t1.entries.first().unwrap().frequency;
            assert!((hi1 - hi0).abs() < bound);
        }
    }

    #[test]
    fn zeeman_map_branch_splittings_grow_monotonically() {
        // Pure spin Zeeman (orbital term off): both doublet splittings grow
        // monotonically along (001). With the quenched orbital term back on,
        // the ground upper-branch gap peaks near 3 T, but the full manifold
        // span still grows monotonically — pin both behaviors.
        let mut p_pure = defaults();
        p_pure.f_orbital = 0.0;
        let p_full = defaults();
        let steps = 50;
        let mut prev_pure = [-1.0f64; 2];
        let mut prev_span = -1.0f64;
        for k in 0..steps {
            let b = 7.0 * k as f64 / (steps - 1) as f64;
            let f = field_001(b);
            let es =
                eigensystem(&build_ground_hamiltonian(&p_pure, &f, false).unwrap()).unwrap();
            let gaps = [es.energies[1] - es.energies[0], es.energies[3] - es.energies[2]];
            for (gap, prev) in gaps.iter().zip(&prev_pure) {
                assert!(*gap >= *prev - 1e-3, "branch gap shrank at B = {b}");
            }
            prev_pure = gaps;

            let es =
                eigensystem(&build_ground_hamiltonian(&p_full, &f, false).unwrap()).unwrap();
            let span = es.energies[3] - es.energies[0];
            assert!(span >= prev_span - 1e-3, "manifold span shrank at B = {b}");
            prev_span = span;
        }
    }

    #[test]
    fn zeeman_map_rejects_degenerate_axis() {
        assert!(zeeman_map(&defaults(), [0.0; 3], 1.0, 5).is_err());
        assert!(zeeman_map(&defaults(), [0.0, 0.0, 1.0], 1.0, 1).is_err());
    }

    #[test]
    fn validator_rejects_bad_parameters() {
        let mut p = defaults();
        p.lambda_e = p.lambda_g / 2.0;
        assert!(p.validate().is_err());
        let mut p = defaults();
        p.gamma_rad = -1.0;
        assert!(p.validate().is_err());
        let mut p = defaults();
        p.nu0 = f64::NAN;
        assert!(p.validate().is_err());
        let mut p = defaults();
        p.so_sign_g = 0.5;
        assert!(p.validate().is_err());
        assert!(
            build_ground_hamiltonian(&defaults(), &MagneticField { b: [f64::NAN, 0.0, 0.0] }, false)
                .is_err()
        );
    }

    proptest! {
        #[test]
        fn hamiltonians_are_hermitian(
            bx in -5.0f64..5.0, by in -5.0f64..5.0, bz in -5.0f64..5.0,
            alpha in -1e11f64..1e11, beta in -1e11f64..1e11,
            nuclear in proptest::bool::ANY,
        ) {
            let mut p = defaults();
            p.strain_g = (alpha, beta);
            p.strain_e = (beta, alpha);
            let f = MagneticField { b: [bx, by, bz] };
            for m in [
                build_ground_hamiltonian(&p, &f, nuclear).unwrap(),
                build_excited_hamiltonian(&p, &f, nuclear).unwrap(),
            ] {
                let scale = m.h.max_abs().max(1.0);
                prop_assert!(m.h.hermiticity_defect() < 1e-12 * scale);
                // Trace of eigenvalues equals matrix trace.
                let es = eigensystem(&m).unwrap();
                let tr: f64 = es.energies.iter().sum();
                prop_assert!((tr - m.h.trace().re).abs() < 1e-10 * scale);
            }
        }

        #[test]
        fn strain_preserves_kramers_degeneracy(
            alpha in -2e11f64..2e11, beta in -2e11f64..2e11,
        ) {
            let mut p = defaults();
            p.strain_g = (alpha, beta);
            let m = build_ground_hamiltonian(&p, &MagneticField::zero(), false).unwrap();
            let es = eigensystem(&m).unwrap();
            let scale = es.spectral_norm().max(1.0);
            prop_assert!((es.energies[1] - es.energies[0]).abs() < 1e-12 * scale);
            prop_assert!((es.energies[3] - es.energies[2]).abs() < 1e-12 * scale);
            // And the splitting follows sqrt(λ² + 4(α² + β²)).
            let split = es.energies[3] - es.energies[0];
            let want = crate::fmath::sqrt(
                p.lambda_g * p.lambda_g + 4.0 * (alpha * alpha + beta * beta),
            );
            prop_assert!((split - want).abs() < 1e-10 * scale);
        }

        #[test]
        fn aligned_field_selection_rule_holds_for_any_strength(k in 1u32..700) {
            // Coarse 0.01 T grid keeps clear of the accidental line
            // crossings where unrelated lines would merge.
            let b = k as f64 * 0.01;
            let p = defaults();
            let f = field_111(b);
            let gs = eigensystem(&build_ground_hamiltonian(&p, &f, false).unwrap()).unwrap();
            let es = eigensystem(&build_excited_hamiltonian(&p, &f, false).unwrap()).unwrap();
            let table = transition_table(&gs, &es, &p).unwrap();
            let bright = table.entries.iter().filter(|e| e.rel_intensity > 1e-8).count();
            prop_assert_eq!(bright, 6);
            // No in-between weights: a line is either fully allowed or
            // spin-forbidden.
            for e in &table.entries {
                prop_assert!(e.rel_intensity >= 0.5 - 1e-9 || e.rel_intensity < 1e-8);
            }
        }

        #[test]
        fn intensities_normalized_with_unit_peak(
            bx in -4.0f64..4.0, by in -4.0f64..4.0, bz in -4.0f64..4.0,
        ) {
            let p = defaults();
            let f = MagneticField { b: [bx, by, bz] };
            let gs = eigensystem(&build_ground_hamiltonian(&p, &f, false).unwrap()).unwrap();
            let es = eigensystem(&build_excited_hamiltonian(&p, &f, false).unwrap()).unwrap();
            let table = transition_table(&gs, &es, &p).unwrap();
            let max = table
                .entries
                .iter()
                .map(|e| e.rel_intensity)
                .fold(0.0f64, f64::max);
            prop_assert!((max - 1.0).abs() < 1e-12);
            for e in &table.entries {
                prop_assert!(e.rel_intensity >= 0.0 && e.rel_intensity <= 1.0 + 1e-12);
                prop_assert!(e.frequency.is_finite());
            }
        }
    }
}
