//! Truncated Fourier series of periodic signals.
//!
//! Convention used throughout the crate:
//! `f(τ) = F_0 + Re Σ_{h≥1} F_h e^{ihτ}`, with `F_0` real.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};

/// Complex Fourier coefficients `F_0..F_H` of a periodic signal.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HarmonicSpectrum {
    coeffs: Vec<Complex64>,
}

impl HarmonicSpectrum {
    pub fn zeros(order: usize) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); order + 1],
        }
    }

    /// Builds a spectrum from `F_0..F_H`. The imaginary part of `F_0` is dropped.
    pub fn from_coefficients(mut coeffs: Vec<Complex64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        coeffs[0].im = 0.0;
        Self { coeffs }
    }

    /// Truncation order `H`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient `h`, zero beyond the truncation order.
    pub fn get(&self, h: usize) -> Complex64 {
        self.coeffs.get(h).copied().unwrap_or_default()
    }

    pub fn set(&mut self, h: usize, value: Complex64) {
        if h >= self.coeffs.len() {
            self.coeffs.resize(h + 1, Complex64::new(0.0, 0.0));
        }
        self.coeffs[h] = if h == 0 { Complex64::new(value.re, 0.0) } else { value };
    }

    pub fn magnitude(&self, h: usize) -> f64 {
        self.get(h).norm()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Evaluates the series at phase `tau`.
    pub fn evaluate(&self, tau: f64) -> f64 {
        evaluate_series(&self.coeffs, tau)
    }

    /// Largest `‖F_h‖` over the given harmonics.
    pub fn max_magnitude<I: IntoIterator<Item = usize>>(&self, harmonics: I) -> f64 {
        harmonics
            .into_iter()
            .map(|h| self.magnitude(h))
            .fold(0.0, f64::max)
    }
}

/// Reduces a phase to `[0, 2π)`.
pub fn wrap_phase(tau: f64) -> f64 {
    let r = tau % (2.0 * PI);
    if r < 0.0 {
        r + 2.0 * PI
    } else {
        r
    }
}

/// `c_0 + Re Σ c_h e^{ihτ}` for a raw coefficient slice.
#[inline]
pub fn evaluate_series(coeffs: &[Complex64], tau: f64) -> f64 {
    let Some((first, rest)) = coeffs.split_first() else {
        return 0.0;
    };
    let (s, c) = tau.sin_cos();
    let z = Complex64::new(c, s);
    let mut zh = z;
    let mut acc = first.re;
    for coeff in rest {
        acc += coeff.re * zh.re - coeff.im * zh.im;
        zh *= z;
    }
    acc
}

/// Fourier coefficients of uniformly sampled data spanning an integer number
/// of fundamental periods. Sample `k` is taken at phase `tau0 + 2πk/n` where
/// `n = samples_per_period`. No taper is applied.
pub fn window_spectrum(
    samples: &[f64],
    samples_per_period: usize,
    tau0: f64,
    order: usize,
) -> Result<HarmonicSpectrum> {
    let n = samples_per_period;
    if n < 2 * order + 1 {
        return Err(invalid("too few samples per period for the requested order"));
    }
    if samples.len() < n {
        return Err(Error::InsufficientData("window shorter than one period".into()));
    }
    if samples.len() % n != 0 {
        return Err(invalid("window must span an integer number of periods"));
    }
    let twiddle: Vec<Complex64> = (0..n)
        .map(|k| {
            let (s, c) = (2.0 * PI * k as f64 / n as f64).sin_cos();
            Complex64::new(c, -s)
        })
        .collect();
    // Sum per phase bin first; the window repeats every n samples.
    let mut folded = vec![0.0; n];
    for chunk in samples.chunks_exact(n) {
        for (acc, x) in folded.iter_mut().zip(chunk) {
            *acc += x;
        }
    }
    let count = samples.len() as f64;
    let mut coeffs = Vec::with_capacity(order + 1);
    coeffs.push(Complex64::new(folded.iter().sum::<f64>() / count, 0.0));
    for h in 1..=order {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, x) in folded.iter().enumerate() {
            acc += twiddle[(h * k) % n] * *x;
        }
        let (s, c) = (h as f64 * tau0).sin_cos();
        coeffs.push(acc * Complex64::new(c, -s) * (2.0 / count));
    }
    Ok(HarmonicSpectrum::from_coefficients(coeffs))
}
