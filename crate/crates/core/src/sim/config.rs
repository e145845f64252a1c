use alloc::string::String;
use alloc::vec::Vec;

use crate::control::PiGains;
use crate::error::{invalid, Result};
use crate::sim::integrator::IntegratorConfig;

/// Controller settings shared by the fundamental loop, the adaptive filter
/// and the harmonizer.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ControlConfig {
    /// Target fundamental excitation level `F̂_1` (N, or m/s² for base drive).
    pub target: f64,
    /// Integral gain of the level controller `k_f` (V per unit per s).
    pub fundamental_gain: f64,
    pub fundamental_enabled: bool,
    /// `‖U_1‖` at the start of a run, V.
    pub initial_voltage: f64,
    /// Adaptive filter order `H`.
    pub order: usize,
    /// Adaptive filter cutoff `ω_LP`, rad/s.
    pub cutoff: f64,
    /// Controlled harmonics; empty disables harmonization.
    pub harmonics: Vec<usize>,
    pub gains: PiGains,
    /// Amplifier input limit, V.
    pub voltage_limit: f64,
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target > 0.0) {
            return Err(invalid("target level must be positive"));
        }
        if self.order == 0 {
            return Err(invalid("filter order must be at least 1"));
        }
        if self.harmonics.iter().any(|h| *h > self.order) {
            return Err(invalid("filter order must cover every controlled harmonic"));
        }
        if !(self.cutoff > 0.0) {
            return Err(invalid("filter cutoff must be positive"));
        }
        if !(self.voltage_limit > 0.0) {
            return Err(invalid("voltage limit must be positive"));
        }
        Ok(())
    }
}

/// Optional Gaussian noise added to the measured excitation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseConfig {
    /// Standard deviation in excitation units; zero disables noise.
    pub std_dev: f64,
    pub seed: u64,
}

/// Time-marching and post-processing settings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    /// Nominal controller/output sample rate, Hz. During hold phases the
    /// sample interval is adjusted so that a period holds an integer number
    /// of samples.
    pub sample_rate: f64,
    pub integrator: IntegratorConfig,
    /// Response observation location (mode-shape row name).
    pub observation: String,
    /// Settledness tolerance as a fraction of the target level.
    pub settle_tolerance: f64,
    /// Non-periodic flag threshold on the response aperiodicity ratio.
    pub aperiodicity_limit: f64,
    pub noise: NoiseConfig,
}

impl SimConfig {
    pub fn new(observation: impl Into<String>) -> Self {
        Self {
            sample_rate: 1e4,
            integrator: IntegratorConfig { max_step: 1e-3, rtol: 1e-9, atol: 1e-13, min_step: 1e-12 },
            observation: observation.into(),
            settle_tolerance: 2e-3,
            aperiodicity_limit: 1e-3,
            noise: NoiseConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(invalid("sample rate must be positive"));
        }
        if !(self.settle_tolerance > 0.0) {
            return Err(invalid("settle tolerance must be positive"));
        }
        if !(self.noise.std_dev >= 0.0) {
            return Err(invalid("noise standard deviation must be non-negative"));
        }
        self.integrator.validate()
    }
}
