//! Excitation phase profiles: constant frequency and half-cosine ramps.

use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};

/// Half-cosine blend between two excitation frequencies.
///
/// `Ω(s) = Ω_a + (Ω_b − Ω_a)(1 − cos(πs/T))/2` for `0 ≤ s ≤ T`; the phase is
/// its exact integral, so `τ` is C¹ and `dΩ/dt` vanishes at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyRamp {
    pub from: f64,
    pub to: f64,
    pub duration: f64,
}

impl FrequencyRamp {
    pub fn new(from: f64, to: f64, duration: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(invalid("ramp duration must be positive"));
        }
        Ok(Self { from, to, duration })
    }

    pub fn omega(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.duration);
        self.from + (self.to - self.from) * 0.5 * (1.0 - (PI * s / self.duration).cos())
    }

    /// Phase advance `∫_0^s Ω dt`.
    pub fn phase(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.duration);
        let d = self.to - self.from;
        self.from * s + 0.5 * d * (s - self.duration / PI * (PI * s / self.duration).sin())
    }
}

/// Phase as a function of time within one simulation segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseProfile {
    Constant(f64),
    Ramp(FrequencyRamp),
}

impl PhaseProfile {
    #[inline]
    pub fn phase(&self, s: f64) -> f64 {
        match self {
            Self::Constant(w) => w * s,
            Self::Ramp(r) => r.phase(s),
        }
    }

    #[inline]
    pub fn omega(&self, s: f64) -> f64 {
        match self {
            Self::Constant(w) => *w,
            Self::Ramp(r) => r.omega(s),
        }
    }
}

/// Ramp between two frequencies, returning the phase at a local time.
pub fn ramp_frequency(from: f64, to: f64, duration: f64) -> Result<FrequencyRamp> {
    FrequencyRamp::new(from, to, duration)
}
