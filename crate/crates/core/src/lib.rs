//! Effective-model toolkit for the negatively charged silicon-vacancy (SiV-)
//! color center in diamond.
//!
//! The crate models the center's fine structure as a four-dimensional orbital
//! (x) spin space per electronic manifold, with spin-orbit coupling, strain,
//! and Zeeman terms assembled in the defect's own (111) frame. On top of that
//! sit single-phonon orbital relaxation rates, a dense-matrix Lindblad
//! integrator, and ready-made coherent-control experiments (optical pumping,
//! coherent population trapping, microwave and all-optical Ramsey probes,
//! Mollow-type driving, and Raman spin manipulation). A small photophysics
//! module converts measured pulse-train parameters into a transition dipole
//! moment and quantum efficiency.
//!
//! Everything here is `no_std`-compatible (with `alloc`); enable the `libm`
//! feature when building without `std` to supply the float math backend. File
//! formats, configuration parsing, and the command-line front end live in the
//! companion `sivsim-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("building without `std` requires the `libm` feature for float math");

pub mod constants;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod fft;
pub mod fit;
pub mod matrix;
pub mod phonon;
pub mod photophysics;
pub mod protocols;
pub mod spectrum;

pub(crate) mod fmath;

pub use error::SimError;
