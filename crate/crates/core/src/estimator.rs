//! Steady-flow Fourier coefficient estimation with the time-continuous LMS
//! adaptive filter, discretized by explicit Euler at the sample rate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

pub use crate::spectrum::HarmonicSpectrum;
use crate::error::{invalid, Error, Result};

/// Adaptive filter tracking `F̃_0..F̃_H`.
///
/// In period average each channel behaves as a first-order low-pass with
/// cutoff `ω_LP`. Harmonic channels use gain `2ω_LP`; the DC channel uses
/// `ω_LP` so that a constant input is an exact fixed point with the same rate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdaptiveFilter {
    cutoff: f64,
    coeffs: HarmonicSpectrum,
}

impl AdaptiveFilter {
    pub fn new(order: usize, cutoff: f64) -> Result<Self> {
        if order == 0 {
            return Err(invalid("adaptive filter order must be at least 1"));
        }
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(invalid("adaptive filter cutoff must be positive"));
        }
        Ok(Self { cutoff, coeffs: HarmonicSpectrum::zeros(order) })
    }

    pub fn order(&self) -> usize {
        self.coeffs.order()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn set_cutoff(&mut self, cutoff: f64) {
        self.cutoff = cutoff;
    }

    pub fn estimate(&self) -> &HarmonicSpectrum {
        &self.coeffs
    }

    /// Overwrites the current estimate (initial condition).
    pub fn set_estimate(&mut self, estimate: &HarmonicSpectrum) {
        for h in 0..=self.order() {
            self.coeffs.set(h, estimate.get(h));
        }
    }

    /// One explicit Euler step at phase `tau` with the current `sample`.
    pub fn step(&mut self, sample: f64, tau: f64, dt: f64) -> Result<()> {
        if !sample.is_finite() {
            return Err(Error::NonFinite { what: "adaptive filter sample", t: f64::NAN });
        }
        if !(dt > 0.0) {
            return Err(invalid(format!("filter step requires dt > 0, got {dt}")));
        }
        if dt * self.cutoff > 0.1 {
            log::warn!("adaptive filter step dt·ω_LP = {} exceeds 0.1", dt * self.cutoff);
        }
        let (s, c) = tau.sin_cos();
        self.step_with_phasor(sample, Complex64::new(c, s), dt);
        Ok(())
    }

    /// Hot-path variant of [`step`](Self::step) taking `e^{iτ}` directly.
    #[inline]
    pub fn step_with_phasor(&mut self, sample: f64, z: Complex64, dt: f64) {
        let coeffs = self.coeffs.coefficients_mut();
        let mut zh = z;
        let mut model = coeffs[0].re;
        for c in coeffs[1..].iter() {
            model += c.re * zh.re - c.im * zh.im;
            zh *= z;
        }
        let residual = sample - model;
        let gain = dt * self.cutoff * residual;
        coeffs[0].re += gain;
        let mut zh = z;
        for c in coeffs[1..].iter_mut() {
            // e^{-ihτ} = conj(z^h)
            *c += zh.conj() * (2.0 * gain);
            zh *= z;
        }
    }
}

/// Time-stamped snapshots of the filter estimate.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoefficientHistory {
    pub times: Vec<f64>,
    pub spectra: Vec<HarmonicSpectrum>,
}

impl CoefficientHistory {
    pub fn push(&mut self, t: f64, spectrum: HarmonicSpectrum) {
        self.times.push(t);
        self.spectra.push(spectrum);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `‖F̃_h‖` series over the whole history.
    pub fn magnitudes(&self, h: usize) -> Vec<f64> {
        self.spectra.iter().map(|s| s.magnitude(h)).collect()
    }

    /// Per-harmonic fluctuation over the trailing `window` seconds: the
    /// largest deviation of `‖F̃_h‖` from its window mean, normalized by the
    /// window mean of `‖F̃_1‖`. `omega` is the fundamental frequency used to
    /// check that the window covers at least five periods.
    pub fn fluctuation(&self, window: f64, omega: f64) -> Result<Vec<f64>> {
        let Some(&t_end) = self.times.last() else {
            return Err(Error::InsufficientData("empty coefficient history".into()));
        };
        let periods = window * omega / (2.0 * core::f64::consts::PI);
        if periods < 5.0 - 1e-9 {
            return Err(Error::InsufficientData(format!(
                "fluctuation window covers {periods:.2} periods, need at least 5"
            )));
        }
        if t_end - self.times[0] < window * (1.0 - 1e-9) {
            return Err(Error::InsufficientData("history shorter than the window".into()));
        }
        let start = self.times.partition_point(|t| *t < t_end - window * (1.0 + 1e-12));
        let slice = &self.spectra[start..];
        let order = slice.iter().map(|s| s.order()).min().unwrap_or(0);
        let n = slice.len() as f64;
        let fundamental = slice.iter().map(|s| s.magnitude(1)).sum::<f64>() / n;
        let mut out = vec![0.0; order + 1];
        for (h, o) in out.iter_mut().enumerate() {
            let mean = slice.iter().map(|s| s.magnitude(h)).sum::<f64>() / n;
            let dev = slice
                .iter()
                .map(|s| (s.magnitude(h) - mean).abs())
                .fold(0.0, f64::max);
            *o = if fundamental > 0.0 { dev / fundamental } else { dev };
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn constant_input_converges_to_dc() {
        let mut f = AdaptiveFilter::new(3, 5.0).unwrap();
        let omega = 40.0;
        let dt = 1e-4;
        for k in 0..40_000 {
            let t = k as f64 * dt;
            f.step(2.5, omega * t, dt).unwrap();
        }
        let e = f.estimate();
        assert!((e.get(0).re - 2.5).abs() < 1e-6);
        for h in 1..=3 {
            assert!(e.magnitude(h) < 1e-4, "h={h} {}", e.magnitude(h));
        }
    }

    #[test]
    fn exact_series_is_a_fixed_point() {
        let spec = HarmonicSpectrum::from_coefficients(vec![
            Complex64::new(0.3, 0.0),
            Complex64::new(1.0, -0.4),
            Complex64::new(0.1, 0.2),
        ]);
        let mut f = AdaptiveFilter::new(2, 3.0).unwrap();
        f.set_estimate(&spec);
        let dt = 1e-4;
        for k in 0..5000 {
            let tau = 31.0 * k as f64 * dt;
            f.step(spec.evaluate(tau), tau, dt).unwrap();
        }
        for h in 0..=2 {
            assert!((f.estimate().get(h) - spec.get(h)).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mut f = AdaptiveFilter::new(2, 3.0).unwrap();
        assert!(f.step(f64::NAN, 0.0, 1e-4).is_err());
        assert!(f.step(1.0, 0.0, 0.0).is_err());
        assert!(AdaptiveFilter::new(0, 1.0).is_err());
        assert!(AdaptiveFilter::new(2, -1.0).is_err());
    }

    #[test]
    fn fluctuation_of_steady_record_is_zero() {
        let mut hist = CoefficientHistory::default();
        let spec = HarmonicSpectrum::from_coefficients(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(0.1, 0.1),
        ]);
        for k in 0..200 {
            hist.push(k as f64 * 0.01, spec.clone());
        }
        let m = hist.fluctuation(1.5, 2.0 * PI * 5.0).unwrap();
        assert!(m.iter().all(|v| *v < 1e-15));
        assert!(hist.fluctuation(0.5, 2.0 * PI).is_err());
        assert!(CoefficientHistory::default().fluctuation(1.0, 100.0).is_err());
    }
}
