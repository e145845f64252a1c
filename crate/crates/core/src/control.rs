//! Command synthesis: fundamental level controller and the per-harmonic PI
//! harmonization module.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::spectrum::{evaluate_series, HarmonicSpectrum};

/// PI gains for one harmonic.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PiGains {
    /// Proportional gain, V per unit of excitation.
    pub kp: f64,
    /// Integral gain, V per unit of excitation per second.
    pub ki: f64,
}

/// PI controllers driving the higher excitation harmonics to zero.
///
/// For every `h` in the harmonic set: `İ_h = −F̃_h`, `U_h = k_p İ_h + k_i I_h`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Harmonizer {
    harmonics: Vec<usize>,
    gains: Vec<PiGains>,
    integrators: Vec<Complex64>,
}

impl Harmonizer {
    /// Same gains for every harmonic. An empty set disables harmonization.
    pub fn new(mut harmonics: Vec<usize>, gains: PiGains) -> Result<Self> {
        harmonics.sort_unstable();
        harmonics.dedup();
        if harmonics.iter().any(|h| *h < 2) {
            return Err(invalid("harmonization acts on harmonics h ≥ 2 only"));
        }
        check_gains(gains)?;
        let n = harmonics.len();
        Ok(Self { harmonics, gains: vec![gains; n], integrators: vec![Complex64::new(0.0, 0.0); n] })
    }

    pub fn disabled() -> Self {
        Self { harmonics: Vec::new(), gains: Vec::new(), integrators: Vec::new() }
    }

    /// Per-harmonic gain override.
    pub fn set_gains_for(&mut self, h: usize, gains: PiGains) -> Result<()> {
        check_gains(gains)?;
        let idx = self
            .harmonics
            .iter()
            .position(|x| *x == h)
            .ok_or_else(|| invalid("harmonic not in the controlled set"))?;
        self.gains[idx] = gains;
        Ok(())
    }

    pub fn set_gains(&mut self, gains: PiGains) -> Result<()> {
        check_gains(gains)?;
        self.gains.iter_mut().for_each(|g| *g = gains);
        Ok(())
    }

    pub fn harmonics(&self) -> &[usize] {
        &self.harmonics
    }

    pub fn is_enabled(&self) -> bool {
        !self.harmonics.is_empty()
    }

    pub fn max_harmonic(&self) -> usize {
        self.harmonics.last().copied().unwrap_or(0)
    }

    /// Integrator state `I_h` (zero for uncontrolled harmonics).
    pub fn integrator(&self, h: usize) -> Complex64 {
        self.harmonics
            .iter()
            .position(|x| *x == h)
            .map(|i| self.integrators[i])
            .unwrap_or_default()
    }

    pub fn set_integrator(&mut self, h: usize, value: Complex64) {
        if let Some(i) = self.harmonics.iter().position(|x| *x == h) {
            self.integrators[i] = value;
        }
    }

    pub fn reset(&mut self) {
        self.integrators.iter_mut().for_each(|i| *i = Complex64::new(0.0, 0.0));
    }

    /// Advances the integrators and returns the voltage spectrum `U_0..U_H`
    /// (zero outside the harmonic set).
    pub fn step(&mut self, estimate: &HarmonicSpectrum, dt: f64) -> Result<HarmonicSpectrum> {
        if estimate.order() < self.max_harmonic() {
            return Err(invalid("estimate order is below the highest controlled harmonic"));
        }
        let mut out = HarmonicSpectrum::zeros(estimate.order());
        self.step_into(estimate.coefficients(), dt, false, out.coefficients_mut());
        Ok(out)
    }

    /// Hot-path step writing `U_h` into `voltages[h]`. With `freeze` the
    /// integrators hold their value (anti-windup).
    #[inline]
    pub fn step_into(&mut self, estimate: &[Complex64], dt: f64, freeze: bool, voltages: &mut [Complex64]) {
        for ((h, g), integ) in self.harmonics.iter().zip(&self.gains).zip(self.integrators.iter_mut()) {
            let err = -estimate.get(*h).copied().unwrap_or_default();
            if !freeze {
                *integ += err * dt;
            }
            if let Some(v) = voltages.get_mut(*h) {
                *v = err * g.kp + *integ * g.ki;
            }
        }
    }
}

fn check_gains(g: PiGains) -> Result<()> {
    if !(g.kp.is_finite() && g.ki.is_finite()) || g.ki < 0.0 {
        return Err(invalid("harmonizer gains must be finite with k_i ≥ 0"));
    }
    Ok(())
}

/// Integral level controller for the fundamental excitation harmonic.
///
/// The frequency is imposed and the phase of `U_1` is held at zero; only the
/// magnitude is adjusted so that `‖F̃_1‖` tracks the target.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FundamentalController {
    target: f64,
    gain: f64,
    voltage_limit: f64,
    amplitude: f64,
    saturated: bool,
}

impl FundamentalController {
    pub fn new(target: f64, gain: f64, voltage_limit: f64) -> Result<Self> {
        if !(target.is_finite() && target > 0.0) {
            return Err(invalid("fundamental target level must be positive"));
        }
        if !(gain.is_finite() && gain >= 0.0) {
            return Err(invalid("fundamental controller gain must be non-negative"));
        }
        if !(voltage_limit > 0.0) {
            return Err(invalid("voltage limit must be positive"));
        }
        Ok(Self { target, gain, voltage_limit, amplitude: 0.0, saturated: false })
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn set_gain(&mut self, gain: f64) {
        self.gain = gain;
    }

    pub fn voltage_limit(&self) -> f64 {
        self.voltage_limit
    }

    /// `U_1` (real, phase pinned at zero).
    pub fn voltage(&self) -> Complex64 {
        Complex64::new(self.amplitude, 0.0)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Sets `‖U_1‖` directly, e.g. for the isola jump or an open-loop drive.
    pub fn set_amplitude(&mut self, amplitude: f64) {
        self.amplitude = amplitude.clamp(0.0, self.voltage_limit);
    }

    /// Whether the last step hit the voltage limit.
    pub fn saturated(&self) -> bool {
        self.saturated
    }

    /// Integrates `k_f (F̂_1 − ‖F̃_1‖)` and returns the new `U_1`.
    #[inline]
    pub fn step(&mut self, estimate: &HarmonicSpectrum, dt: f64) -> Complex64 {
        self.step_with_level(estimate.magnitude(1), dt)
    }

    #[inline]
    pub fn step_with_level(&mut self, level: f64, dt: f64) -> Complex64 {
        let next = self.amplitude + self.gain * (self.target - level) * dt;
        self.saturated = next > self.voltage_limit;
        self.amplitude = next.clamp(0.0, self.voltage_limit);
        self.voltage()
    }
}

/// `u = Re{U_1 e^{iτ}} + Re Σ_{h≥2} U_h e^{ihτ}`. Index 0 of `higher` is
/// ignored, as is its index 1 (the fundamental comes from `u1`).
pub fn synthesize_command(u1: Complex64, higher: &HarmonicSpectrum, tau: f64) -> f64 {
    let mut coeffs = higher.coefficients().to_vec();
    if coeffs.len() < 2 {
        coeffs.resize(2, Complex64::new(0.0, 0.0));
    }
    coeffs[0] = Complex64::new(0.0, 0.0);
    coeffs[1] = u1;
    evaluate_series(&coeffs, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn zero_error_leaves_voltages_zero() {
        let mut hz = Harmonizer::new(vec![2, 3], PiGains { kp: 1.0, ki: 2.0 }).unwrap();
        let u = hz.step(&HarmonicSpectrum::zeros(3), 1e-3).unwrap();
        assert!(u.coefficients().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn proportional_only_is_static() {
        let mut hz = Harmonizer::new(vec![3], PiGains { kp: 0.4, ki: 0.0 }).unwrap();
        let mut est = HarmonicSpectrum::zeros(3);
        let c = Complex64::new(0.2, -0.1);
        est.set(3, c);
        for _ in 0..10 {
            let u = hz.step(&est, 1e-3).unwrap();
            assert!((u.get(3) + c * 0.4).norm() < 1e-15);
            assert_eq!(u.get(2), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn integrator_accumulates_and_freezes() {
        let mut hz = Harmonizer::new(vec![2], PiGains { kp: 0.0, ki: 1.0 }).unwrap();
        let mut est = HarmonicSpectrum::zeros(2);
        est.set(2, Complex64::new(1.0, 0.0));
        hz.step(&est, 0.5).unwrap();
        assert_eq!(hz.integrator(2), Complex64::new(-0.5, 0.0));
        let mut v = [Complex64::new(0.0, 0.0); 3];
        hz.step_into(est.coefficients(), 0.5, true, &mut v);
        assert_eq!(hz.integrator(2), Complex64::new(-0.5, 0.0));
        assert_eq!(v[2], Complex64::new(-0.5, 0.0));
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(Harmonizer::new(vec![1, 2], PiGains { kp: 1.0, ki: 1.0 }).is_err());
        assert!(Harmonizer::new(vec![2], PiGains { kp: 1.0, ki: -1.0 }).is_err());
        let mut hz = Harmonizer::new(vec![2, 5], PiGains { kp: 1.0, ki: 1.0 }).unwrap();
        assert!(hz.step(&HarmonicSpectrum::zeros(3), 1e-3).is_err());
        assert!(hz.set_gains_for(3, PiGains { kp: 1.0, ki: 1.0 }).is_err());
        assert!(hz.set_gains_for(5, PiGains { kp: 2.0, ki: 0.0 }).is_ok());
    }

    #[test]
    fn fundamental_controller_tracks_and_saturates() {
        let mut c = FundamentalController::new(2.0, 0.1, 1.0).unwrap();
        let mut est = HarmonicSpectrum::zeros(1);
        est.set(1, Complex64::new(0.0, 2.0));
        c.set_amplitude(0.3);
        c.step(&est, 1e-3);
        assert_eq!(c.amplitude(), 0.3);
        est.set(1, Complex64::new(0.0, 0.0));
        for _ in 0..10_000 {
            c.step(&est, 1e-2);
        }
        assert_eq!(c.amplitude(), 1.0);
        assert!(c.saturated());
        let mut open = FundamentalController::new(2.0, 0.0, 10.0).unwrap();
        open.set_amplitude(0.5);
        open.step(&est, 1.0);
        assert_eq!(open.amplitude(), 0.5);
    }

    #[test]
    fn command_synthesis_examples() {
        let zero = HarmonicSpectrum::zeros(3);
        assert_eq!(synthesize_command(Complex64::new(0.0, 0.0), &zero, 1.2), 0.0);
        assert!((synthesize_command(Complex64::new(1.0, 0.0), &zero, 0.0) - 1.0).abs() < 1e-15);
        let mut higher = HarmonicSpectrum::zeros(3);
        higher.set(3, Complex64::new(0.0, 1.0));
        let u = synthesize_command(Complex64::new(1.0, 0.0), &higher, PI / 2.0);
        assert!((u - 1.0).abs() < 1e-12);
    }
}
