//! Scenario files: plant, controller, simulation, reference, tuning and
//! baseline settings in TOML, with units in the key names. Every section
//! and key is optional; omitted values fall back to the built-in beam.

use std::path::Path;

use harmonize_core::baseline::IterativeOptions;
use harmonize_core::model::{CubicSpring, ExcitationCoupling, Exciter, Location, ModalStructure, Plant};
use harmonize_core::reference::{ArclengthOptions, ReferenceModel, ShootingOptions};
use harmonize_core::scenario::{self as beam, physical_gains};
use harmonize_core::sim::{ControlConfig, NoiseConfig, SimConfig};
use harmonize_core::sim::IntegratorConfig;
use harmonize_core::tuning::{OnsetOptions, TuningOptions};
use serde::{Deserialize, Serialize};

use crate::error::{validation, BenchError, Result};
use crate::io::read_text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Seed of every random stream (measurement noise).
    pub seed: u64,
    pub structure: StructureSection,
    pub nonlinearity: NonlinearitySection,
    pub exciter: ExciterSection,
    pub drive: DriveSection,
    pub control: ControlSection,
    pub simulation: SimulationSection,
    pub reference: ReferenceSection,
    pub tuning: TuningSection,
    pub iterative: IterativeSection,
    pub campaign: CampaignSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureSection {
    pub natural_frequencies_rad_s: Vec<f64>,
    pub damping_ratios: Vec<f64>,
    pub locations: Vec<LocationEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationEntry {
    pub name: String,
    /// Mass-normalized mode-shape values, one per mode.
    pub mode_shapes_per_sqrt_kg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearitySection {
    pub cubic_stiffness_n_per_m3: f64,
    pub location: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExciterSection {
    pub moving_mass_kg: f64,
    pub coil_resistance_ohm: f64,
    pub force_constant_n_per_a: f64,
    pub natural_frequency_rad_s: f64,
    pub damping_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DriveSection {
    /// Shaker force applied through a stinger at a named location.
    Force { location: String },
    /// Structure mounted on the armature.
    Base { participation_sqrt_kg: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    /// Fundamental target: newtons for force drive, m/s² for base drive.
    pub target_level_n_or_m_s2: f64,
    pub fundamental_gain_v_per_unit_s: f64,
    pub fundamental_enabled: bool,
    pub initial_voltage_v: f64,
    pub filter_order: usize,
    /// Adaptive filter cutoff as a fraction of the first natural frequency.
    pub cutoff_omega_ratio: f64,
    pub harmonics: Vec<usize>,
    /// `k_p G/R`.
    pub kp_normalized: f64,
    /// `k_i G/(R ω_LP)`.
    pub ki_normalized: f64,
    pub voltage_limit_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub observation: String,
    pub sample_rate_hz: f64,
    pub max_step_s: f64,
    pub min_step_s: f64,
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    /// Half-window drift of the excitation spectrum, fraction of the target.
    pub settle_tolerance_fraction: f64,
    pub aperiodicity_limit: f64,
    pub noise_std_dev_n_or_m_s2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    pub steps_per_period: usize,
    pub periodicity_tolerance: f64,
    pub max_iterations: usize,
    pub response_order: usize,
    /// Frequency window of branch tracing.
    pub omega_min_ratio: f64,
    pub omega_max_ratio: f64,
    pub initial_arclength: f64,
    pub max_arclength: f64,
    pub min_arclength: f64,
    pub max_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningSection {
    /// Representative operating point.
    pub omega_ratio: f64,
    pub fluctuation_tolerance_fraction: f64,
    pub cutoff_min_omega_ratio: f64,
    pub cutoff_max_omega_ratio: f64,
    pub cutoff_points: usize,
    /// Cutoff used when the whole scanned range is admissible; omit to keep
    /// the top of the range.
    pub cutoff_fallback_omega_ratio: Option<f64>,
    pub kp_normalized_start: f64,
    pub kp_normalized_max: f64,
    pub ki_normalized_start: f64,
    pub ki_normalized_max: f64,
    pub sweep_ratio: f64,
    pub settle_periods: usize,
    pub trial_periods: usize,
    pub scan_periods: usize,
    pub snapshots_per_period: usize,
    pub onset_window_periods: f64,
    pub onset_threshold_fraction: f64,
    pub onset_growth_windows: usize,
    pub onset_min_periods: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterativeSection {
    /// Convergence threshold on every higher harmonic, fraction of the target.
    pub epsilon_fraction: f64,
    pub max_iterations: usize,
    /// Finite-difference step, fraction of `|U_1|`.
    pub fd_step_fraction: f64,
    pub hold_periods: usize,
    pub window_periods: usize,
    pub warm_start: bool,
    pub reuse_jacobian: bool,
}

/// Campaign wiring; paths are relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSection {
    pub steps: Vec<CampaignStep>,
    pub schedule_file: Option<String>,
    pub iterative_schedule_file: Option<String>,
    /// Use the tuned gains and cutoff in the simulations that follow tuning.
    pub apply_tuned_gains: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CampaignStep {
    Tune,
    Simulate,
    Reference,
    Iterate,
    Compare,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "shaw-beam".into(),
            seed: 1,
            structure: StructureSection::default(),
            nonlinearity: NonlinearitySection::default(),
            exciter: ExciterSection::default(),
            drive: DriveSection::default(),
            control: ControlSection::default(),
            simulation: SimulationSection::default(),
            reference: ReferenceSection::default(),
            tuning: TuningSection::default(),
            iterative: IterativeSection::default(),
            campaign: CampaignSection::default(),
        }
    }
}

impl Default for StructureSection {
    fn default() -> Self {
        Self {
            natural_frequencies_rad_s: beam::BEAM_OMEGA.to_vec(),
            damping_ratios: beam::BEAM_DAMPING.to_vec(),
            locations: beam::BEAM_SHAPES
                .iter()
                .map(|(n, s)| LocationEntry { name: (*n).into(), mode_shapes_per_sqrt_kg: s.to_vec() })
                .collect(),
        }
    }
}

impl Default for NonlinearitySection {
    fn default() -> Self {
        Self { cubic_stiffness_n_per_m3: beam::BEAM_CUBIC_STIFFNESS, location: beam::BEAM_SPRING_LOCATION.into() }
    }
}

impl Default for ExciterSection {
    fn default() -> Self {
        let e = beam::SHAW_EXCITER;
        Self {
            moving_mass_kg: e.mass,
            coil_resistance_ohm: e.resistance,
            force_constant_n_per_a: e.force_constant,
            natural_frequency_rad_s: e.omega,
            damping_ratio: e.damping,
        }
    }
}

impl Default for DriveSection {
    fn default() -> Self {
        Self::Force { location: "x1".into() }
    }
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            target_level_n_or_m_s2: beam::DEFAULT_TARGET,
            fundamental_gain_v_per_unit_s: beam::DEFAULT_FUNDAMENTAL_GAIN,
            fundamental_enabled: true,
            initial_voltage_v: 0.0,
            filter_order: beam::DEFAULT_ORDER,
            cutoff_omega_ratio: 0.1,
            harmonics: (2..=beam::DEFAULT_ORDER).collect(),
            kp_normalized: beam::DEFAULT_KP_NORMALIZED,
            ki_normalized: beam::DEFAULT_KI_NORMALIZED,
            voltage_limit_v: beam::DEFAULT_VOLTAGE_LIMIT,
        }
    }
}

impl Default for SimulationSection {
    fn default() -> Self {
        let s = SimConfig::new(beam::BEAM_RESPONSE_LOCATION);
        Self {
            observation: s.observation,
            sample_rate_hz: s.sample_rate,
            max_step_s: s.integrator.max_step,
            min_step_s: s.integrator.min_step,
            relative_tolerance: s.integrator.rtol,
            absolute_tolerance: s.integrator.atol,
            settle_tolerance_fraction: s.settle_tolerance,
            aperiodicity_limit: s.aperiodicity_limit,
            noise_std_dev_n_or_m_s2: 0.0,
        }
    }
}

impl Default for ReferenceSection {
    fn default() -> Self {
        let s = ShootingOptions::default();
        Self {
            steps_per_period: s.steps_per_period,
            periodicity_tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            response_order: s.order,
            omega_min_ratio: 0.8,
            omega_max_ratio: 2.0,
            initial_arclength: 0.05,
            max_arclength: 0.3,
            min_arclength: 1e-5,
            max_points: 3000,
        }
    }
}

impl Default for TuningSection {
    fn default() -> Self {
        let t = TuningOptions::default();
        Self {
            omega_ratio: 1.0,
            fluctuation_tolerance_fraction: t.tolerance,
            cutoff_min_omega_ratio: t.cutoff_min_ratio,
            cutoff_max_omega_ratio: t.cutoff_max_ratio,
            cutoff_points: t.cutoff_points,
            cutoff_fallback_omega_ratio: t.cutoff_fallback_ratio,
            kp_normalized_start: t.kp_start,
            kp_normalized_max: t.kp_max,
            ki_normalized_start: t.ki_start,
            ki_normalized_max: t.ki_max,
            sweep_ratio: t.ratio,
            settle_periods: t.settle_periods,
            trial_periods: t.trial_periods,
            scan_periods: t.scan_periods,
            snapshots_per_period: t.snapshots_per_period,
            onset_window_periods: t.onset.window_periods,
            onset_threshold_fraction: t.onset.threshold,
            onset_growth_windows: t.onset.growth_windows,
            onset_min_periods: t.onset.min_periods,
        }
    }
}

impl Default for IterativeSection {
    fn default() -> Self {
        let o = IterativeOptions::default();
        Self {
            epsilon_fraction: o.epsilon,
            max_iterations: o.max_iterations,
            fd_step_fraction: o.fd_fraction,
            hold_periods: o.hold_periods,
            window_periods: o.window_periods,
            warm_start: o.warm_start,
            reuse_jacobian: o.reuse_jacobian,
        }
    }
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            steps: vec![
                CampaignStep::Tune,
                CampaignStep::Simulate,
                CampaignStep::Reference,
                CampaignStep::Iterate,
                CampaignStep::Compare,
            ],
            schedule_file: None,
            iterative_schedule_file: None,
            apply_tuned_gains: false,
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| validation(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?).map_err(|e| match e {
            BenchError::Validation(m) => validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes to TOML")
    }

    /// Builds every derived object once so that errors surface at load time.
    pub fn validate(&self) -> Result<()> {
        let plant = self.plant()?;
        plant.structure.shape(&self.simulation.observation)?;
        self.control()?.validate()?;
        self.sim_config().validate()?;
        self.shooting_options().validate()?;
        self.tuning_options().validate()?;
        self.iterative_options().validate()?;
        if !(self.reference.omega_min_ratio > 0.0 && self.reference.omega_max_ratio > self.reference.omega_min_ratio) {
            return Err(validation("reference window must satisfy 0 < omega_min_ratio < omega_max_ratio"));
        }
        if !(self.tuning.omega_ratio > 0.0) {
            return Err(validation("tuning omega_ratio must be positive"));
        }
        Ok(())
    }

    pub fn omega1(&self) -> f64 {
        self.structure.natural_frequencies_rad_s.first().copied().unwrap_or(f64::NAN)
    }

    pub fn structure(&self) -> Result<ModalStructure> {
        let s = &self.structure;
        let locations = s
            .locations
            .iter()
            .map(|l| Location { name: l.name.clone(), shape: l.mode_shapes_per_sqrt_kg.clone() })
            .collect();
        Ok(ModalStructure::new(s.natural_frequencies_rad_s.clone(), s.damping_ratios.clone(), locations)?)
    }

    pub fn exciter(&self) -> Exciter {
        let e = &self.exciter;
        Exciter {
            mass: e.moving_mass_kg,
            resistance: e.coil_resistance_ohm,
            force_constant: e.force_constant_n_per_a,
            omega: e.natural_frequency_rad_s,
            damping: e.damping_ratio,
        }
    }

    pub fn plant(&self) -> Result<Plant> {
        let structure = self.structure()?;
        let spring = CubicSpring {
            stiffness: self.nonlinearity.cubic_stiffness_n_per_m3,
            shape: structure.shape(&self.nonlinearity.location)?.to_vec(),
        };
        let coupling = match &self.drive {
            DriveSection::Force { location } => ExcitationCoupling::Force { drive_shape: structure.shape(location)?.to_vec() },
            DriveSection::Base { participation_sqrt_kg } => {
                ExcitationCoupling::Base { participation: participation_sqrt_kg.clone() }
            }
        };
        Ok(Plant::new(structure, self.exciter(), spring, coupling)?)
    }

    pub fn control(&self) -> Result<ControlConfig> {
        let c = &self.control;
        let cutoff = c.cutoff_omega_ratio * self.omega1();
        let control = ControlConfig {
            target: c.target_level_n_or_m_s2,
            fundamental_gain: c.fundamental_gain_v_per_unit_s,
            fundamental_enabled: c.fundamental_enabled,
            initial_voltage: c.initial_voltage_v,
            order: c.filter_order,
            cutoff,
            harmonics: c.harmonics.clone(),
            gains: physical_gains(&self.exciter(), cutoff, c.kp_normalized, c.ki_normalized),
            voltage_limit: c.voltage_limit_v,
        };
        control.validate()?;
        Ok(control)
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.simulation;
        SimConfig {
            sample_rate: s.sample_rate_hz,
            integrator: IntegratorConfig {
                max_step: s.max_step_s,
                rtol: s.relative_tolerance,
                atol: s.absolute_tolerance,
                min_step: s.min_step_s,
            },
            observation: s.observation.clone(),
            settle_tolerance: s.settle_tolerance_fraction,
            aperiodicity_limit: s.aperiodicity_limit,
            noise: NoiseConfig { std_dev: s.noise_std_dev_n_or_m_s2, seed: self.seed },
        }
    }

    pub fn shooting_options(&self) -> ShootingOptions {
        let r = &self.reference;
        ShootingOptions {
            steps_per_period: r.steps_per_period,
            tolerance: r.periodicity_tolerance,
            max_iterations: r.max_iterations,
            order: r.response_order,
        }
    }

    pub fn arclength_options(&self) -> ArclengthOptions {
        let r = &self.reference;
        let w1 = self.omega1();
        let mut o = ArclengthOptions::new(r.omega_min_ratio * w1, r.omega_max_ratio * w1);
        o.step = r.initial_arclength;
        o.max_step = r.max_arclength;
        o.min_step = r.min_arclength;
        o.max_points = r.max_points;
        o
    }

    /// Shooting model under ideal forcing at the control target.
    pub fn reference_model(&self) -> Result<ReferenceModel> {
        let mut m = ReferenceModel::new(self.plant()?, self.control.target_level_n_or_m_s2, &self.simulation.observation);
        m.options = self.shooting_options();
        Ok(m)
    }

    pub fn tuning_options(&self) -> TuningOptions {
        let t = &self.tuning;
        TuningOptions {
            tolerance: t.fluctuation_tolerance_fraction,
            cutoff_min_ratio: t.cutoff_min_omega_ratio,
            cutoff_max_ratio: t.cutoff_max_omega_ratio,
            cutoff_points: t.cutoff_points,
            cutoff_fallback_ratio: t.cutoff_fallback_omega_ratio,
            kp_start: t.kp_normalized_start,
            kp_max: t.kp_normalized_max,
            ki_start: t.ki_normalized_start,
            ki_max: t.ki_normalized_max,
            ratio: t.sweep_ratio,
            settle_periods: t.settle_periods,
            trial_periods: t.trial_periods,
            scan_periods: t.scan_periods,
            snapshots_per_period: t.snapshots_per_period,
            onset: OnsetOptions {
                window_periods: t.onset_window_periods,
                threshold: t.onset_threshold_fraction,
                growth_windows: t.onset_growth_windows,
                min_periods: t.onset_min_periods,
            },
        }
    }

    pub fn iterative_options(&self) -> IterativeOptions {
        let i = &self.iterative;
        IterativeOptions {
            epsilon: i.epsilon_fraction,
            max_iterations: i.max_iterations,
            fd_fraction: i.fd_step_fraction,
            hold_periods: i.hold_periods,
            window_periods: i.window_periods,
            warm_start: i.warm_start,
            reuse_jacobian: i.reuse_jacobian,
        }
    }

    /// Copy with harmonization switched off.
    pub fn without_harmonization(&self) -> Self {
        let mut s = self.clone();
        s.control.harmonics.clear();
        s
    }

    /// Copy with the tuned cutoff and normalized gains.
    pub fn with_tuned(&self, cutoff: f64, kp_normalized: f64, ki_normalized: f64) -> Self {
        let mut s = self.clone();
        s.control.cutoff_omega_ratio = cutoff / self.omega1();
        s.control.kp_normalized = kp_normalized;
        s.control.ki_normalized = ki_normalized;
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_built_in_beam() {
        let s = Scenario::from_toml("").unwrap();
        assert_eq!(s, Scenario::default());
        let plant = s.plant().unwrap();
        assert_eq!(plant, beam::shaw_beam_plant("x1").unwrap());
        let c = s.control().unwrap();
        let d = beam::default_control(&beam::SHAW_EXCITER);
        assert_eq!(c.harmonics, d.harmonics);
        assert!((c.cutoff - d.cutoff).abs() < 1e-12);
        assert!((c.gains.kp - d.gains.kp).abs() < 1e-12 && (c.gains.ki - d.gains.ki).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(Scenario::from_toml("[exciter]\nmass = 1.0\n").is_err());
        assert!(Scenario::from_toml("[drive]\nkind = \"force\"\nlocation = \"x9\"\n").is_err());
        assert!(Scenario::from_toml("[control]\nharmonics = [2, 9]\n").is_err());
    }

    #[test]
    fn base_drive_section() {
        let s = Scenario::from_toml("[drive]\nkind = \"base\"\nparticipation_sqrt_kg = [0.1, 0.05]\n").unwrap();
        assert!(s.plant().unwrap().coupling.is_base());
    }
}
