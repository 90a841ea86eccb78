//! Float math shim: routes through `std` methods when available and through
//! `libm` otherwise, so the rest of the crate never cares which backend is in
//! play.

#![allow(dead_code)]

#[cfg(feature = "std")]
mod backend {
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    pub fn expm1(x: f64) -> f64 {
        x.exp_m1()
    }
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    pub fn sin(x: f64) -> f64 {
        x.sin()
    }
    pub fn cos(x: f64) -> f64 {
        x.cos()
    }
    pub fn atan2(y: f64, x: f64) -> f64 {
        y.atan2(x)
    }
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }
    pub fn floor(x: f64) -> f64 {
        x.floor()
    }
    pub fn round(x: f64) -> f64 {
        x.round()
    }
    pub fn powf(x: f64, y: f64) -> f64 {
        x.powf(y)
    }
    pub fn powi(x: f64, n: i32) -> f64 {
        x.powi(n)
    }
    pub fn hypot(x: f64, y: f64) -> f64 {
        x.hypot(y)
    }
    pub fn cbrt(x: f64) -> f64 {
        x.cbrt()
    }
}

#[cfg(not(feature = "std"))]
mod backend {
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    pub fn expm1(x: f64) -> f64 {
        libm::expm1(x)
    }
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
    pub fn atan2(y: f64, x: f64) -> f64 {
        libm::atan2(y, x)
    }
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
    pub fn floor(x: f64) -> f64 {
        libm::floor(x)
    }
    pub fn round(x: f64) -> f64 {
        libm::round(x)
    }
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
    pub fn powi(x: f64, n: i32) -> f64 {
        libm::pow(x, n as f64)
    }
    pub fn hypot(x: f64, y: f64) -> f64 {
        libm::hypot(x, y)
    }
    pub fn cbrt(x: f64) -> f64 {
        libm::cbrt(x)
    }
}

pub use backend::*;
