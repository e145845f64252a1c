//! Closed-form frequency-domain analysis of the harmonization loop:
//! dynamic stiffnesses, exciter-structure interaction, stability criterion,
//! mass ratios and drive-point screening.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::model::{ExcitationCoupling, Exciter, ModalStructure};

/// Dynamic stiffness of mode `l`: `S_ℓ(Ω) = −Ω² + 2D_ℓω_ℓ iΩ + ω_ℓ²`.
pub fn structural_stiffness(structure: &ModalStructure, mode: usize, omega: f64) -> Complex64 {
    let w = structure.omega()[mode];
    let d = structure.damping()[mode];
    Complex64::new(w * w - omega * omega, 2.0 * d * w * omega)
}

/// Exciter dynamic stiffness `S_e(Ω) = −Ω² + 2D_ex ω_ex iΩ + ω_ex²`.
pub fn exciter_stiffness(exciter: &Exciter, omega: f64) -> Complex64 {
    Complex64::new(
        exciter.omega * exciter.omega - omega * omega,
        2.0 * exciter.damping * exciter.omega * omega,
    )
}

/// Mass ratio of mode `l`: `m_ex φ_ex,ℓ²` for force drive,
/// `(bᵀMφ_ℓ)²/m_ex` for base drive.
pub fn mass_ratio(exciter: &Exciter, coupling: &ExcitationCoupling, mode: usize) -> f64 {
    match coupling {
        ExcitationCoupling::Force { drive_shape } => exciter.mass * drive_shape[mode].powi(2),
        ExcitationCoupling::Base { participation } => participation[mode].powi(2) / exciter.mass,
    }
}

/// Single-mode interaction ratio `Z_e,ℓ(Ω) = μ_ℓ S_e(Ω)/S_ℓ(Ω)`.
pub fn interaction_ratio_mode(
    structure: &ModalStructure,
    exciter: &Exciter,
    coupling: &ExcitationCoupling,
    mode: usize,
    omega: f64,
) -> Complex64 {
    exciter_stiffness(exciter, omega) * mass_ratio(exciter, coupling, mode)
        / structural_stiffness(structure, mode, omega)
}

/// Interaction ratio summed over all modes, `Z_e = Σ_ℓ Z_e,ℓ`.
pub fn interaction_ratio(
    structure: &ModalStructure,
    exciter: &Exciter,
    coupling: &ExcitationCoupling,
    omega: f64,
) -> Complex64 {
    (0..structure.modes())
        .map(|l| interaction_ratio_mode(structure, exciter, coupling, l, omega))
        .sum()
}

/// `1/(1 + k_p G/R + Z_e(Ω))`, the loop transfer whose real part decides stability.
pub fn loop_transfer(
    structure: &ModalStructure,
    exciter: &Exciter,
    coupling: &ExcitationCoupling,
    omega: f64,
    kp: f64,
) -> Complex64 {
    let denom = Complex64::new(1.0 + kp * exciter.voltage_gain(), 0.0)
        + interaction_ratio(structure, exciter, coupling, omega);
    denom.inv()
}

/// `Re{k_i/(1 + k_p G/R + Z_e(Ω))}`, evaluated at the harmonic frequency
/// `omega = hΩ`. Positive predicts an asymptotically stable fixed point.
pub fn stability_margin(
    structure: &ModalStructure,
    exciter: &Exciter,
    coupling: &ExcitationCoupling,
    omega: f64,
    kp: f64,
    ki: f64,
) -> f64 {
    (loop_transfer(structure, exciter, coupling, omega, kp) * ki).re
}

/// Voltage coefficient that cancels a harmonic disturbance `D_h` at the
/// loop's fixed point: `U_h = −D_h R/G`.
pub fn fixed_point_voltage(disturbance: Complex64, exciter: &Exciter) -> Complex64 {
    -disturbance / exciter.voltage_gain()
}

/// Real part of the loop transfer over a frequency grid for one drive point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StabilityScan {
    pub location: String,
    /// Proportional gain `k_p` (V/N).
    pub kp: f64,
    pub frequencies: Vec<f64>,
    /// `Re{1/(1 + k_p G/R + Z_e)}` per grid point.
    pub real_parts: Vec<f64>,
}

impl StabilityScan {
    /// Grid positions where the real part changes sign from positive to
    /// negative, linearly interpolated.
    pub fn negative_crossings(&self) -> Vec<f64> {
        self.crossings(true)
    }

    pub fn positive_crossings(&self) -> Vec<f64> {
        self.crossings(false)
    }

    fn crossings(&self, negative: bool) -> Vec<f64> {
        let mut out = Vec::new();
        for k in 1..self.real_parts.len() {
            let (a, b) = (self.real_parts[k - 1], self.real_parts[k]);
            let hit = if negative { a > 0.0 && b <= 0.0 } else { a <= 0.0 && b > 0.0 };
            if hit {
                let (wa, wb) = (self.frequencies[k - 1], self.frequencies[k]);
                out.push(wa + (wb - wa) * a / (a - b));
            }
        }
        out
    }

    pub fn min(&self) -> f64 {
        self.real_parts.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.real_parts.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether the real part stays positive over the whole grid.
    pub fn admissible(&self) -> bool {
        self.real_parts.iter().all(|v| *v > 0.0)
    }
}

/// Mass ratios and stability scans of one candidate drive point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DrivePointCandidate {
    pub location: String,
    pub mass_ratios: Vec<f64>,
    pub scans: Vec<StabilityScan>,
    /// No sign change for any of the scanned gains.
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DrivePointReport {
    pub candidates: Vec<DrivePointCandidate>,
}

impl DrivePointReport {
    pub fn candidate(&self, location: &str) -> Option<&DrivePointCandidate> {
        self.candidates.iter().find(|c| c.location == location)
    }
}

/// Screens candidate force-drive locations over a frequency grid for the
/// given proportional gains (V/N).
pub fn drive_point_report(
    structure: &ModalStructure,
    exciter: &Exciter,
    candidates: &[&str],
    grid: &[f64],
    kp_values: &[f64],
) -> Result<DrivePointReport> {
    if candidates.is_empty() {
        return Err(invalid("at least one drive-point candidate is required"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("frequency grid must be strictly increasing"));
    }
    let mut out = Vec::with_capacity(candidates.len());
    for name in candidates {
        let coupling = ExcitationCoupling::Force { drive_shape: structure.shape(name)?.to_vec() };
        let mass_ratios = (0..structure.modes()).map(|l| mass_ratio(exciter, &coupling, l)).collect();
        let scans: Vec<StabilityScan> = kp_values
            .iter()
            .map(|kp| StabilityScan {
                location: String::from(*name),
                kp: *kp,
                frequencies: grid.to_vec(),
                real_parts: grid
                    .iter()
                    .map(|w| loop_transfer(structure, exciter, &coupling, *w, *kp).re)
                    .collect(),
            })
            .collect();
        let admissible = scans.iter().all(StabilityScan::admissible);
        out.push(DrivePointCandidate { location: String::from(*name), mass_ratios, scans, admissible });
    }
    Ok(DrivePointReport { candidates: out })
}

/// Outcome of the truncation-order check against the sampling rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TruncationCheck {
    Ok,
    /// Below `2πν_s/Ω_max` but above the Nyquist harmonic count `πν_s/Ω_max`.
    NyquistWarning,
    Aliasing,
}

/// Checks `H < 2πν_s/Ω_max`, warning above half of that bound.
pub fn check_truncation_order(order: usize, sample_rate_hz: f64, omega_max: f64) -> TruncationCheck {
    let bound = 2.0 * PI * sample_rate_hz / omega_max;
    let h = order as f64;
    if h >= bound {
        TruncationCheck::Aliasing
    } else if h >= bound / 2.0 {
        TruncationCheck::NyquistWarning
    } else {
        TruncationCheck::Ok
    }
}
