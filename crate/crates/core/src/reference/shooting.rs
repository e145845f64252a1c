//! Shooting for periodic orbits under imposed harmonic forcing, with Floquet
//! stability from the monodromy matrix.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::model::{ExcitationCoupling, Plant};
use crate::reference::newmark::{newmark_integrate, Forcing};
use crate::spectrum::{window_spectrum, HarmonicSpectrum};

/// Unit-circle band for stability verdicts.
pub const UNIT_CIRCLE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShootingOptions {
    pub steps_per_period: usize,
    /// Periodicity residual relative to the state norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Harmonic order of the stored response spectrum.
    pub order: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { steps_per_period: 1000, tolerance: 1e-8, max_iterations: 30, order: 7 }
    }
}

impl ShootingOptions {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_period < 100 {
            return Err(invalid("at least 100 steps per period are required"));
        }
        if self.steps_per_period < 2 * self.order + 1 {
            return Err(invalid("too few steps per period for the response order"));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(invalid("shooting tolerance and iteration limit must be positive"));
        }
        Ok(())
    }
}

/// Periodic-orbit problem at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingProblem {
    /// Force-driven plant; the exciter is bypassed.
    pub plant: Plant,
    pub forcing: Forcing,
    /// Initial state guess `[η, η̇]` at `t = 0`.
    pub guess: Vec<f64>,
    /// Response location for the stored spectrum.
    pub observation: String,
    pub options: ShootingOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

/// Converged periodic orbit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BranchPoint {
    pub omega: f64,
    /// Forcing phase `θ`.
    pub phase: f64,
    pub level: f64,
    /// Periodic initial state `[η, η̇]`.
    pub state: Vec<f64>,
    /// Displacement spectrum at the observation point, phase referenced to
    /// `τ = Ω t + θ`.
    pub response: HarmonicSpectrum,
    pub multipliers: Vec<Complex64>,
    pub stability: Stability,
    /// A complex multiplier pair lies outside the unit circle.
    pub torus: bool,
    pub residual: f64,
    pub iterations: usize,
}

impl BranchPoint {
    pub fn is_stable(&self) -> bool {
        self.stability == Stability::Stable
    }

    pub fn amplitude(&self, h: usize) -> f64 {
        self.response.magnitude(h)
    }
}

/// Floquet multipliers and verdicts from a monodromy matrix.
pub fn floquet(monodromy: &DMatrix<f64>) -> Result<(Vec<Complex64>, Stability, bool)> {
    let eig = monodromy.clone().complex_eigenvalues();
    let multipliers: Vec<Complex64> = eig.iter().map(|c| Complex64::new(c.re, c.im)).collect();
    if multipliers.iter().any(|m| !(m.re.is_finite() && m.im.is_finite())) {
        return Err(Error::NonFinite { what: "Floquet multipliers", t: f64::NAN });
    }
    let max = multipliers.iter().map(|m| m.norm()).fold(0.0, f64::max);
    let stability = if max < 1.0 - UNIT_CIRCLE_TOLERANCE {
        Stability::Stable
    } else if max > 1.0 + UNIT_CIRCLE_TOLERANCE {
        Stability::Unstable
    } else {
        Stability::Marginal
    };
    let torus = multipliers
        .iter()
        .any(|m| m.norm() > 1.0 + UNIT_CIRCLE_TOLERANCE && m.im.abs() > 1e-9 * m.norm());
    Ok((multipliers, stability, torus))
}

/// Periodic state of the linearized system (spring removed) under `forcing`.
pub fn linear_guess(plant: &Plant, forcing: &Forcing) -> Result<Vec<f64>> {
    let ExcitationCoupling::Force { drive_shape } = &plant.coupling else {
        return Err(Error::WrongCoupling("force"));
    };
    let s = &plant.structure;
    let m = s.modes();
    let w = forcing.omega;
    let f = Complex64::from_polar(forcing.amplitude, forcing.phase);
    let mut x = alloc::vec![0.0; 2 * m];
    for l in 0..m {
        let wl = s.omega()[l];
        let den = Complex64::new(wl * wl - w * w, 2.0 * s.damping()[l] * wl * w);
        let eta = f * drive_shape[l] / den;
        x[l] = eta.re;
        x[m + l] = (Complex64::new(0.0, w) * eta).re;
    }
    Ok(x)
}

/// Periodicity residual `x(T) − x0` and optionally its Jacobian `Φ − I`.
pub(crate) fn periodicity(
    plant: &Plant,
    forcing: &Forcing,
    x0: &[f64],
    steps: usize,
    jacobian: bool,
) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
    let out = newmark_integrate(plant, forcing, x0, forcing.period(), steps, jacobian, false)?;
    let r = DVector::from_iterator(x0.len(), out.end.iter().zip(x0).map(|(a, b)| a - b));
    let j = out.sensitivity.map(|s| s - DMatrix::<f64>::identity(x0.len(), x0.len()));
    Ok((r, j))
}

/// Response spectrum and Floquet data of a converged orbit.
pub(crate) fn finish_point(
    plant: &Plant,
    forcing: &Forcing,
    state: Vec<f64>,
    observation: &str,
    options: &ShootingOptions,
    residual: f64,
    iterations: usize,
) -> Result<BranchPoint> {
    let steps = options.steps_per_period;
    let out = newmark_integrate(plant, forcing, &state, forcing.period(), steps, true, true)?;
    let shape = plant.structure.shape(observation)?;
    let m = plant.modes();
    let samples: Vec<f64> = out.trajectory[..steps]
        .iter()
        .map(|x| shape.iter().zip(&x[..m]).map(|(p, e)| p * e).sum())
        .collect();
    let response = window_spectrum(&samples, steps, forcing.phase, options.order)?;
    let monodromy = out.sensitivity.expect("sensitivity requested");
    let (multipliers, stability, torus) = floquet(&monodromy)?;
    Ok(BranchPoint {
        omega: forcing.omega,
        phase: forcing.phase,
        level: forcing.amplitude,
        state,
        response,
        multipliers,
        stability,
        torus,
        residual,
        iterations,
    })
}

fn state_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Newton iteration on the periodicity residual.
pub fn shoot(problem: &ShootingProblem) -> Result<BranchPoint> {
    let opts = &problem.options;
    opts.validate()?;
    let f = &problem.forcing;
    if !(f.amplitude >= 0.0 && f.omega > 0.0) {
        return Err(invalid("forcing needs a non-negative level and positive frequency"));
    }
    let n = 2 * problem.plant.modes();
    if problem.guess.len() != n {
        return Err(invalid(format!("guess must have {n} entries")));
    }
    let steps = opts.steps_per_period;
    let mut x = problem.guess.clone();
    let (mut r, _) = periodicity(&problem.plant, f, &x, steps, false)?;
    let mut iterations = 0;
    loop {
        let res = r.norm();
        let scale = state_norm(&x);
        if res <= opts.tolerance * scale || res == 0.0 {
            return finish_point(&problem.plant, f, x, &problem.observation, opts, res / scale.max(1e-300), iterations);
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NoConvergence(format!(
                "shooting at Ω = {} stalled with relative residual {:.3e}",
                f.omega,
                res / scale.max(1e-300)
            )));
        }
        let (_, j) = periodicity(&problem.plant, f, &x, steps, true)?;
        let j = j.expect("jacobian requested");
        let dx = j.lu().solve(&(-&r)).ok_or(Error::Singular("shooting Jacobian"))?;
        // Damped update: halve until the residual does not blow up.
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..8 {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + lambda * d).collect();
            if let Ok((rt, _)) = periodicity(&problem.plant, f, &trial, steps, false) {
                if rt.norm() < res * (1.0 - 1e-4 * lambda) || rt.norm() <= opts.tolerance * state_norm(&trial) {
                    accepted = Some((trial, rt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((xn, rn)) = accepted else {
            return Err(Error::NoConvergence(format!("shooting at Ω = {} diverged", f.omega)));
        };
        x = xn;
        r = rn;
        iterations += 1;
    }
}

/// Analytic multipliers `e^{λT}` of the linear modal system.
pub fn linear_multipliers(plant: &Plant, omega: f64) -> Vec<Complex64> {
    let s = &plant.structure;
    let t = 2.0 * PI / omega;
    let mut out = Vec::new();
    for (w, d) in s.omega().iter().zip(s.damping()) {
        let wd = w * (1.0 - d * d).sqrt();
        for sign in [1.0, -1.0] {
            out.push((Complex64::new(-d * w, sign * wd) * t).exp());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::shaw_beam_plant;

    #[test]
    fn linear_plant_converges_in_one_step() {
        let mut plant = shaw_beam_plant("x1").unwrap();
        plant.spring.stiffness = 0.0;
        let forcing = Forcing { amplitude: 2.0, omega: 60.0, phase: 0.4 };
        let p = ShootingProblem {
            plant,
            forcing,
            guess: alloc::vec![0.01, -0.02, 0.3, 0.1],
            observation: "x3".into(),
            options: ShootingOptions::default(),
        };
        let bp = shoot(&p).unwrap();
        assert_eq!(bp.iterations, 1);
        assert_eq!(bp.stability, Stability::Stable);
        assert!(!bp.torus);
    }

    #[test]
    fn floquet_verdicts() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.9]);
        assert_eq!(floquet(&m).unwrap().1, Stability::Stable);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.2]);
        assert_eq!(floquet(&m).unwrap().1, Stability::Marginal);
        let (_, s, torus) = floquet(&DMatrix::from_row_slice(2, 2, &[0.0, -1.2, 1.2, 0.0])).unwrap();
        assert_eq!(s, Stability::Unstable);
        assert!(torus);
        let (_, s, torus) = floquet(&DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 0.1])).unwrap();
        assert_eq!(s, Stability::Unstable);
        assert!(!torus);
    }

    #[test]
    fn options_validation() {
        let o = ShootingOptions { steps_per_period: 50, ..Default::default() };
        assert!(o.validate().is_err());
        assert!(ShootingOptions::default().validate().is_ok());
    }
}
