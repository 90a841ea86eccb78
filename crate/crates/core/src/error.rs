//! Error type shared across the simulation crate.

use alloc::string::String;

use crate::matrix::CMat;

/// Everything that can go wrong inside the simulation core.
#[derive(Debug, Clone)]
pub enum SimError {
    /// A parameter failed validation; the message names the offending field.
    InvalidParameter(String),
    /// An eigensolve or linear solve did not converge / was singular.
    LinearAlgebra(String),
    /// The adaptive integrator could not reach the requested accuracy.
    ///
    /// Carries the time that was reached and the last accepted state so a
    /// caller can inspect how far the evolution got.
    IntegrationFailure {
        /// Time of the last accepted step.
        t_reached: f64,
        /// Density matrix at `t_reached`.
        last_state: CMat,
        /// Human-readable diagnosis.
        message: String,
    },
    /// The Liouvillian null space is not one-dimensional, so no unique
    /// steady state exists.
    DegenerateSteadyState {
        /// Dimension of the computed null space.
        nullity: usize,
    },
    /// A least-squares fit failed to converge or was ill-posed.
    FitFailure(String),
}

impl core::fmt::Display for SimError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SimError::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            SimError::LinearAlgebra(msg) => write!(f, "linear algebra failure: {msg}"),
            SimError::IntegrationFailure {
                t_reached, message, ..
            } => write!(f, "integration failed at t = {t_reached:.6e} s: {message}"),
            SimError::DegenerateSteadyState { nullity } => write!(
                f,
                "steady state is not unique (Liouvillian nullity {nullity})"
            ),
            SimError::FitFailure(msg) => write!(f, "fit failure: {msg}"),
        }
    }
}

impl core::error::Error for SimError {}
