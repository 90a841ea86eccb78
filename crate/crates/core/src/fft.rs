//! Radix-2 discrete Fourier transform.
//!
//! Forward convention `X_k = Σ_n x_n · exp(-2πi·kn/N)`, matching the usual
//! signal-processing definition, so a drive at +f shows up in the positive
//! half of [`fftfreq`]. Inputs must be power-of-two length; the spectrum
//! analysis code pads or truncates before calling in here.

use alloc::format;
use alloc::vec::Vec;

use crate::error::SimError;
use crate::fmath;
use crate::matrix::{c, C64};

/// In-place iterative Cooley-Tukey FFT. Errors unless `data.len()` is a
/// nonzero power of two.
pub fn fft_in_place(data: &mut [C64]) -> Result<(), SimError> {
    let n = data.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(SimError::InvalidParameter(format!(
            "FFT length must be a nonzero power of two, got {n}"
        )));
    }
    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i.reverse_bits() >> (usize::BITS - bits)) & (n - 1);
        if j > i {
            data.swap(i, j);
        }
    }
    // Butterfly passes.
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * core::f64::consts::PI / len as f64;
        let w_len = c(fmath::cos(ang), fmath::sin(ang));
        let mut start = 0;
        while start < n {
            let mut w = c(1.0, 0.0);
            for k in 0..len / 2 {
                let u = data[start + k];
                let v = data[start + k + len / 2] * w;
                data[start + k] = u + v;
                data[start + k + len / 2] = u - v;
                w *= w_len;
            }
            start += len;
        }
        len <<= 1;
    }
    Ok(())
}

/// Forward FFT into a fresh vector.
pub fn fft(data: &[C64]) -> Result<Vec<C64>, SimError> {
    let mut out = data.to_vec();
    fft_in_place(&mut out)?;
    Ok(out)
}

/// Frequency associated with each FFT bin for sample spacing `dt`, in the
/// standard order `[0, 1, …, n/2-1, -n/2, …, -1] / (n·dt)`.
pub fn fftfreq(n: usize, dt: f64) -> Vec<f64> {
    let step = 1.0 / (n as f64 * dt);
    (0..n)
        .map(|k| {
            if k < n.div_ceil(2) {
                k as f64 * step
            } else {
                (k as f64 - n as f64) * step
            }
        })
        .collect()
}
