//! Sampled-data virtual test: plant, adaptive filter, fundamental controller
//! and harmonizer advanced together at the controller sample rate.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::control::{FundamentalController, Harmonizer};
use crate::error::{invalid, Error, Result};
use crate::estimator::{AdaptiveFilter, CoefficientHistory};
use crate::model::{Plant, Quantity};
use crate::sim::config::{ControlConfig, SimConfig};
use crate::sim::integrator::DormandPrince;
use crate::sim::ramp::{FrequencyRamp, PhaseProfile};
use crate::spectrum::{evaluate_series, HarmonicSpectrum};

/// Values seen at one controller sample, before the controller update.
#[derive(Debug, Clone, Copy)]
pub struct SampleView<'a> {
    pub index: usize,
    pub t: f64,
    pub tau: f64,
    /// Amplifier input after the voltage limit, V.
    pub voltage: f64,
    /// Measured excitation (force or base acceleration), noise included.
    pub excitation: f64,
    /// Displacement at the observation location.
    pub response: f64,
    pub estimate: &'a HarmonicSpectrum,
}

/// Samples collected over one hold phase.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldData {
    pub omega: f64,
    pub samples_per_period: usize,
    pub dt: f64,
    /// Phase of the first window sample.
    pub tau0: f64,
    pub window_periods: usize,
    pub time: Vec<f64>,
    pub voltage: Vec<f64>,
    pub excitation: Vec<f64>,
    pub response: Vec<f64>,
    /// Filter estimate once per period over the whole hold.
    pub history: CoefficientHistory,
    /// Whether the voltage limit clipped any window sample.
    pub clipped: bool,
}

/// Running virtual test.
#[derive(Debug, Clone)]
pub struct VirtualTest {
    plant: Plant,
    control: ControlConfig,
    config: SimConfig,
    obs_shape: Vec<f64>,
    filter: AdaptiveFilter,
    fundamental: FundamentalController,
    harmonizer: Harmonizer,
    voltages: Vec<Complex64>,
    state: Vec<f64>,
    t: f64,
    tau: f64,
    omega: f64,
    stepper: DormandPrince,
    noise: Option<(ChaCha8Rng, Normal<f64>)>,
}

impl VirtualTest {
    /// Starts from rest at frequency `omega`.
    pub fn new(plant: Plant, control: ControlConfig, config: SimConfig, omega: f64) -> Result<Self> {
        control.validate()?;
        config.validate()?;
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid("excitation frequency must be positive"));
        }
        let obs_shape = plant.structure.shape(&config.observation)?.to_vec();
        let filter = AdaptiveFilter::new(control.order, control.cutoff)?;
        let mut fundamental =
            FundamentalController::new(control.target, control.fundamental_gain, control.voltage_limit)?;
        fundamental.set_amplitude(control.initial_voltage);
        let harmonizer = if control.harmonics.is_empty() {
            Harmonizer::disabled()
        } else {
            Harmonizer::new(control.harmonics.clone(), control.gains)?
        };
        let mut voltages = vec![Complex64::new(0.0, 0.0); control.order + 1];
        voltages[1] = fundamental.voltage();
        let noise = if config.noise.std_dev > 0.0 {
            let dist = Normal::new(0.0, config.noise.std_dev).map_err(|_| invalid("noise level"))?;
            Some((ChaCha8Rng::seed_from_u64(config.noise.seed), dist))
        } else {
            None
        };
        let stepper = DormandPrince::new(config.integrator, plant.state_len());
        Ok(Self {
            state: vec![0.0; plant.state_len()],
            plant,
            control,
            config,
            obs_shape,
            filter,
            fundamental,
            harmonizer,
            voltages,
            t: 0.0,
            tau: 0.0,
            omega,
            stepper,
            noise,
        })
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn control(&self) -> &ControlConfig {
        &self.control
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Current phase, reduced to `[0, 2π)` at segment boundaries.
    pub fn phase(&self) -> f64 {
        self.tau
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn set_state(&mut self, state: &[f64]) -> Result<()> {
        if state.len() != self.state.len() || state.iter().any(|v| !v.is_finite()) {
            return Err(invalid("state must be finite with the plant's state length"));
        }
        self.state.copy_from_slice(state);
        Ok(())
    }

    pub fn estimate(&self) -> &HarmonicSpectrum {
        self.filter.estimate()
    }

    pub fn filter_mut(&mut self) -> &mut AdaptiveFilter {
        &mut self.filter
    }

    pub fn harmonizer(&self) -> &Harmonizer {
        &self.harmonizer
    }

    pub fn harmonizer_mut(&mut self) -> &mut Harmonizer {
        &mut self.harmonizer
    }

    pub fn fundamental(&self) -> &FundamentalController {
        &self.fundamental
    }

    pub fn fundamental_mut(&mut self) -> &mut FundamentalController {
        &mut self.fundamental
    }

    /// Voltage spectrum `U_0..U_H` currently applied.
    pub fn command(&self) -> HarmonicSpectrum {
        HarmonicSpectrum::from_coefficients(self.voltages.clone())
    }

    /// Replaces the applied voltage spectrum. `U_1` must be real (phase
    /// pinned); controllers that are active keep overwriting their entries.
    pub fn set_command(&mut self, command: &HarmonicSpectrum) {
        self.fundamental.set_amplitude(command.get(1).re);
        for (h, v) in self.voltages.iter_mut().enumerate().skip(2) {
            *v = command.get(h);
        }
        self.voltages[1] = self.fundamental.voltage();
    }

    /// Enables or disables the fundamental level loop.
    pub fn set_fundamental_enabled(&mut self, enabled: bool) {
        self.control.fundamental_enabled = enabled;
    }

    /// Replaces the harmonizer (e.g. during gain sweeps). Harmonics leaving
    /// the set keep their last voltage unless cleared by the caller.
    pub fn set_harmonizer(&mut self, harmonizer: Harmonizer) -> Result<()> {
        if harmonizer.max_harmonic() > self.control.order {
            return Err(invalid("filter order must cover every controlled harmonic"));
        }
        self.harmonizer = harmonizer;
        Ok(())
    }

    /// Instantaneous frequency change with continuous phase.
    pub fn step_frequency(&mut self, omega: f64) -> Result<()> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid("excitation frequency must be positive"));
        }
        self.omega = omega;
        Ok(())
    }

    fn nominal_dt(&self) -> f64 {
        1.0 / self.config.sample_rate
    }

    /// Half-cosine ramp to `omega` over about `duration` seconds.
    pub fn ramp_to(&mut self, omega: f64, duration: f64) -> Result<()> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid("excitation frequency must be positive"));
        }
        if !(duration > 0.0) {
            return Err(invalid("ramp duration must be positive"));
        }
        let dt0 = self.nominal_dt();
        let n = ((duration / dt0).round() as usize).max(1);
        let dt = duration / n as f64;
        let profile = PhaseProfile::Ramp(FrequencyRamp::new(self.omega, omega, n as f64 * dt)?);
        self.run_segment(profile, n, dt, |_| {})?;
        self.omega = omega;
        Ok(())
    }

    /// Samples per period and sample interval used for holds at the current
    /// frequency.
    pub fn hold_sampling(&self) -> (usize, f64) {
        let period = 2.0 * PI / self.omega;
        let min = 2 * self.control.order + 2;
        let n = ((period / self.nominal_dt()).round() as usize).max(min);
        (n, period / n as f64)
    }

    /// Holds the current frequency for `periods` periods and records the last
    /// `window` periods.
    pub fn hold(&mut self, periods: usize, window: usize) -> Result<HoldData> {
        if window == 0 || window > periods {
            return Err(invalid("hold window must satisfy 0 < window ≤ hold"));
        }
        let (n_per, dt) = self.hold_sampling();
        let total = periods * n_per;
        let start = (periods - window) * n_per;
        let cap = window * n_per;
        let mut data = HoldData {
            omega: self.omega,
            samples_per_period: n_per,
            dt,
            tau0: 0.0,
            window_periods: window,
            time: Vec::with_capacity(cap),
            voltage: Vec::with_capacity(cap),
            excitation: Vec::with_capacity(cap),
            response: Vec::with_capacity(cap),
            history: CoefficientHistory::default(),
            clipped: false,
        };
        let limit = self.control.voltage_limit;
        self.run_segment(PhaseProfile::Constant(self.omega), total, dt, |s| {
            if s.index % n_per == 0 {
                data.history.push(s.t, s.estimate.clone());
            }
            if s.index >= start {
                if s.index == start {
                    data.tau0 = s.tau;
                }
                data.clipped |= s.voltage.abs() >= limit;
                data.time.push(s.t);
                data.voltage.push(s.voltage);
                data.excitation.push(s.excitation);
                data.response.push(s.response);
            }
        })?;
        Ok(data)
    }

    /// Advances `n` samples of width `dt` along `profile`, calling `observe`
    /// at every sample before the controller update.
    pub fn run_segment<O>(&mut self, profile: PhaseProfile, n: usize, dt: f64, mut observe: O) -> Result<()>
    where
        O: FnMut(SampleView<'_>),
    {
        if !(dt > 0.0) {
            return Err(invalid("sample interval must be positive"));
        }
        let t0 = self.t;
        let tau0 = self.tau;
        let limit = self.control.voltage_limit;
        let harmonize = self.harmonizer.is_enabled();
        for k in 0..n {
            let s = k as f64 * dt;
            let t = t0 + s;
            let tau = tau0 + profile.phase(s);
            let (sn, cs) = tau.sin_cos();
            let z = Complex64::new(cs, sn);
            let raw = evaluate_series(&self.voltages, tau);
            let clipped = raw.abs() > limit;
            let u = raw.clamp(-limit, limit);
            let mut e = self.plant.excitation(u, &self.state);
            if let Some((rng, dist)) = &mut self.noise {
                e += dist.sample(rng);
            }
            if !e.is_finite() {
                return Err(Error::NonFinite { what: "excitation", t });
            }
            let r = self.plant.observe_shape(&self.state, &self.obs_shape, Quantity::Displacement, true);
            observe(SampleView {
                index: k,
                t,
                tau,
                voltage: u,
                excitation: e,
                response: r,
                estimate: self.filter.estimate(),
            });

            self.filter.step_with_phasor(e, z, dt);
            if self.control.fundamental_enabled {
                let level = self.filter.estimate().magnitude(1);
                self.voltages[1] = self.fundamental.step_with_level(level, dt);
            }
            if harmonize {
                self.harmonizer
                    .step_into(self.filter.estimate().coefficients(), dt, clipped, &mut self.voltages);
            }

            let plant = &self.plant;
            let volts = &self.voltages;
            self.stepper.advance(
                |tt, y, dy| {
                    let tau = tau0 + profile.phase(tt - t0);
                    let u = evaluate_series(volts, tau).clamp(-limit, limit);
                    plant.derivative_into(u, y, dy);
                },
                t,
                &mut self.state,
                t + dt,
            )?;
        }
        let span = n as f64 * dt;
        self.t = t0 + span;
        self.tau = crate::spectrum::wrap_phase(tau0 + profile.phase(span));
        self.omega = profile.omega(span);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{default_control, shaw_beam_plant, SHAW_EXCITER};

    fn open_loop(volts: f64) -> VirtualTest {
        let mut c = default_control(&SHAW_EXCITER);
        c.harmonics.clear();
        c.fundamental_enabled = false;
        c.initial_voltage = volts;
        VirtualTest::new(shaw_beam_plant("x1").unwrap(), c, SimConfig::new("x3"), 40.0).unwrap()
    }

    #[test]
    fn rest_stays_at_rest_without_voltage() {
        let mut v = open_loop(0.0);
        let d = v.hold(5, 2).unwrap();
        assert!(d.excitation.iter().all(|e| *e == 0.0));
        assert!(v.state().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn hold_windows_span_whole_periods() {
        let mut v = open_loop(0.5);
        let d = v.hold(4, 2).unwrap();
        assert_eq!(d.excitation.len(), 2 * d.samples_per_period);
        assert!((d.dt * d.samples_per_period as f64 - 2.0 * PI / 40.0).abs() < 1e-12);
        assert_eq!(d.history.len(), 4);
        assert!(v.phase() >= 0.0 && v.phase() < 2.0 * PI);
    }

    #[test]
    fn ramp_lands_on_target_frequency() {
        let mut v = open_loop(0.5);
        v.ramp_to(50.0, 0.3).unwrap();
        assert_eq!(v.omega(), 50.0);
        assert!((v.time() - 0.3).abs() < 1e-9);
    }

    #[test]
    fn invalid_hold_window_rejected() {
        let mut v = open_loop(0.5);
        assert!(v.hold(2, 3).is_err());
        assert!(v.hold(2, 0).is_err());
    }
}
