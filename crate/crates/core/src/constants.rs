//! Physical constants (SI units throughout).

/// Fixed set of physical constants used by the model.
///
/// Values follow the 2018 CODATA adjustment; several (ħ, k_B, c) are exact in
/// the revised SI. Construct via [`PhysicalConstants::new`] or use the
/// module-level consts directly.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Speed of light in vacuum, m/s.
    pub c: f64,
    /// Vacuum permittivity, F/m.
    pub eps0: f64,
    /// Bohr magneton, J/T.
    pub mu_b: f64,
    /// One Debye of electric dipole moment, C·m.
    pub debye: f64,
}

/// Reduced Planck constant, J·s (exact).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (exact).
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light in vacuum, m/s (exact).
pub const C_LIGHT: f64 = 2.997_924_58e8;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Bohr magneton, J/T.
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// One Debye, C·m.
pub const DEBYE: f64 = 3.335_64e-30;

impl PhysicalConstants {
    /// The standard constant set.
    pub const fn new() -> Self {
        PhysicalConstants {
            hbar: HBAR,
            k_b: K_B,
            c: C_LIGHT,
            eps0: EPS0,
            mu_b: MU_B,
            debye: DEBYE,
        }
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::new()
    }
}

/// Two pi, for angular-frequency conversions.
pub const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive() {
        let c = PhysicalConstants::new();
        for v in [c.hbar, c.k_b, c.c, c.eps0, c.mu_b, c.debye] {
            assert!(v > 0.0);
        }
    }

    #[test]
    fn thermal_frequency_scale() {
        // k_B·1K / ħ as an angular frequency: independent arithmetic check of
        // the ratio that controls every Bose occupation factor below.
        let x = K_B / HBAR;
        assert!((x - 1.309_203_4e11).abs() / x < 1e-6);
    }
}
