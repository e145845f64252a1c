//! Built-in test article: a clamped beam with a cubic spring at its free end
//! (two modes), driven by a small electrodynamic shaker.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::control::PiGains;
use crate::error::Result;
use crate::model::{CubicSpring, ExcitationCoupling, Exciter, Location, ModalStructure, Plant};
use crate::sim::config::ControlConfig;

pub const BEAM_OMEGA: [f64; 2] = [55.92, 199.18];
pub const BEAM_DAMPING: [f64; 2] = [0.01, 0.01];
pub const BEAM_CUBIC_STIFFNESS: f64 = 2.517e6;
pub const BEAM_SPRING_LOCATION: &str = "x4";
pub const BEAM_RESPONSE_LOCATION: &str = "x3";

/// Mode-shape rows (1/√kg).
pub const BEAM_SHAPES: [(&str, [f64; 2]); 4] = [
    ("x1", [0.125, -0.575]),
    ("x2", [1.35, -3.86]),
    ("x3", [5.13, 3.8]),
    ("x4", [5.34, 4.67]),
];

pub const SHAW_EXCITER: Exciter =
    Exciter { mass: 0.057, resistance: 2.0, force_constant: 6.78, omega: 417.4, damping: 0.935 };

/// Default fundamental target, N.
pub const DEFAULT_TARGET: f64 = 2.0;
/// Default fundamental level gain `k_f`, V/(N s).
pub const DEFAULT_FUNDAMENTAL_GAIN: f64 = 0.1;
/// Default normalized proportional gain `k_p G/R`.
pub const DEFAULT_KP_NORMALIZED: f64 = 3.0;
/// Default normalized integral gain `k_i G/(R ω_LP)`.
pub const DEFAULT_KI_NORMALIZED: f64 = 2.0;
pub const DEFAULT_ORDER: usize = 7;
pub const DEFAULT_VOLTAGE_LIMIT: f64 = 10.0;

pub fn shaw_beam_structure() -> ModalStructure {
    let locations = BEAM_SHAPES
        .iter()
        .map(|(name, shape)| Location { name: name.to_string(), shape: shape.to_vec() })
        .collect();
    ModalStructure::new(BEAM_OMEGA.to_vec(), BEAM_DAMPING.to_vec(), locations)
        .expect("built-in structure is valid")
}

/// Force-driven beam with the shaker attached at `drive`.
pub fn shaw_beam_plant(drive: &str) -> Result<Plant> {
    let structure = shaw_beam_structure();
    let drive_shape = structure.shape(drive)?.to_vec();
    let spring = CubicSpring {
        stiffness: BEAM_CUBIC_STIFFNESS,
        shape: structure.shape(BEAM_SPRING_LOCATION)?.to_vec(),
    };
    Plant::new(structure, SHAW_EXCITER, spring, ExcitationCoupling::Force { drive_shape })
}

/// Converts normalized gains (`k_p G/R`, `k_i G/(R ω_LP)`) to physical gains.
pub fn physical_gains(exciter: &Exciter, cutoff: f64, kp_normalized: f64, ki_normalized: f64) -> PiGains {
    let g = exciter.voltage_gain();
    PiGains { kp: kp_normalized / g, ki: ki_normalized * cutoff / g }
}

/// Inverse of [`physical_gains`].
pub fn normalized_gains(exciter: &Exciter, cutoff: f64, gains: PiGains) -> (f64, f64) {
    let g = exciter.voltage_gain();
    (gains.kp * g, gains.ki * g / cutoff)
}

/// Default controller: order 7, harmonics 2..=7, `ω_LP = ω_1/10`.
pub fn default_control(exciter: &Exciter) -> ControlConfig {
    let cutoff = BEAM_OMEGA[0] / 10.0;
    let harmonics: Vec<usize> = (2..=DEFAULT_ORDER).collect();
    ControlConfig {
        target: DEFAULT_TARGET,
        fundamental_gain: DEFAULT_FUNDAMENTAL_GAIN,
        fundamental_enabled: true,
        initial_voltage: 0.0,
        order: DEFAULT_ORDER,
        cutoff,
        harmonics,
        gains: physical_gains(exciter, cutoff, DEFAULT_KP_NORMALIZED, DEFAULT_KI_NORMALIZED),
        voltage_limit: DEFAULT_VOLTAGE_LIMIT,
    }
}

/// Default controller with harmonization disabled.
pub fn fundamental_only(exciter: &Exciter) -> ControlConfig {
    ControlConfig { harmonics: vec![], ..default_control(exciter) }
}
