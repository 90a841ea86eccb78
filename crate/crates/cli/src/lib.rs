//! Command-line front end for `sivsim-core`.
//!
//! Splits into three layers: [`config`] parses and validates the structured
//! run description (reporting every violation at once and materializing
//! defaults so configs round-trip byte-identically), [`runner`] executes the
//! resolved command — including parallel parameter sweeps with
//! order-independent output — and [`emit`] renders results as
//! full-precision CSV or deterministic JSON.

pub mod config;
pub mod emit;
pub mod runner;
