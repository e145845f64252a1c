//! Adaptive Dormand–Prince 5(4) integration.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};

/// Step-size control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegratorConfig {
    /// Largest internal step, s.
    pub max_step: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Steps below this size abort the integration.
    pub min_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { max_step: 1e-3, rtol: 1e-8, atol: 1e-12, min_step: 1e-12 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_step > 0.0 && self.rtol > 0.0 && self.atol > 0.0 && self.min_step > 0.0) {
            return Err(invalid("integrator step bound and tolerances must be positive"));
        }
        Ok(())
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Reusable Dormand–Prince stepper. Keeps its step-size estimate between
/// calls to [`advance`](Self::advance).
#[derive(Debug, Clone)]
pub struct DormandPrince {
    config: IntegratorConfig,
    h: f64,
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    steps: u64,
    rejected: u64,
}

impl DormandPrince {
    pub fn new(config: IntegratorConfig, dim: usize) -> Self {
        Self {
            config,
            h: config.max_step,
            k: core::array::from_fn(|_| vec![0.0; dim]),
            ytmp: vec![0.0; dim],
            ynew: vec![0.0; dim],
            steps: 0,
            rejected: 0,
        }
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    /// Accepted and rejected step counts so far.
    pub fn step_counts(&self) -> (u64, u64) {
        (self.steps, self.rejected)
    }

    /// Integrates `y` from `t0` to `t1` in place.
    pub fn advance<F>(&mut self, mut rhs: F, t0: f64, y: &mut [f64], t1: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let cfg = self.config;
        let n = y.len();
        let mut t = t0;
        let mut h = self.h.min(cfg.max_step);
        while t < t1 {
            let remaining = t1 - t;
            let clipped = h >= remaining * (1.0 - 1e-12);
            let h_try = if clipped { remaining } else { h };
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let ytmp = &mut self.ytmp;
            let ynew = &mut self.ynew;

            rhs(t, y, k1);
            for i in 0..n {
                ytmp[i] = y[i] + h_try * A21 * k1[i];
            }
            rhs(t + C2 * h_try, ytmp, k2);
            for i in 0..n {
                ytmp[i] = y[i] + h_try * (A31 * k1[i] + A32 * k2[i]);
            }
            rhs(t + C3 * h_try, ytmp, k3);
            for i in 0..n {
                ytmp[i] = y[i] + h_try * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            rhs(t + C4 * h_try, ytmp, k4);
            for i in 0..n {
                ytmp[i] = y[i] + h_try * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            rhs(t + C5 * h_try, ytmp, k5);
            for i in 0..n {
                ytmp[i] = y[i]
                    + h_try * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            rhs(t + h_try, ytmp, k6);
            for i in 0..n {
                ynew[i] = y[i]
                    + h_try * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            rhs(t + h_try, ynew, k7);

            let mut err = 0.0f64;
            for i in 0..n {
                let e = h_try
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = cfg.atol + cfg.rtol * y[i].abs().max(ynew[i].abs());
                err = err.max((e / scale).abs());
            }
            if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
                if h_try <= cfg.min_step * t.abs().max(1.0) {
                    return Err(Error::NonFinite { what: "integrated state", t });
                }
                h = h_try * 0.1;
                self.rejected += 1;
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if clipped { t1 } else { t + h_try };
                y.copy_from_slice(ynew);
                self.steps += 1;
                let proposal = (h_try * factor).min(cfg.max_step);
                // A step shortened to hit t1 says little about the natural size.
                h = if clipped { h.max(proposal).min(cfg.max_step) } else { proposal };
            } else {
                self.rejected += 1;
                h = h_try * factor.min(1.0);
                if h < cfg.min_step * t.abs().max(1.0) {
                    return Err(Error::StepUnderflow { t });
                }
            }
        }
        self.h = h;
        Ok(())
    }
}

/// Output of [`integrate_segment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Integrates `rhs` over `[t0, t1]`, returning states at a fixed output
/// interval (the last interval is shortened to land on `t1`).
pub fn integrate_segment<F>(
    rhs: F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    output_dt: f64,
    config: IntegratorConfig,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    config.validate()?;
    if !(t1 > t0) || !(output_dt > 0.0) {
        return Err(invalid("integration span and output interval must be positive"));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "initial state", t: t0 });
    }
    let mut rhs = rhs;
    let mut stepper = DormandPrince::new(config, y0.len());
    let mut y = y0.to_vec();
    let count = ((t1 - t0) / output_dt - 1e-9).ceil() as usize;
    let mut times = Vec::with_capacity(count + 1);
    let mut states = Vec::with_capacity(count + 1);
    times.push(t0);
    states.push(y.clone());
    let mut t = t0;
    for k in 1..=count {
        let next = if k == count { t1 } else { t0 + k as f64 * output_dt };
        stepper.advance(&mut rhs, t, &mut y, next)?;
        t = next;
        times.push(t);
        states.push(y.clone());
    }
    Ok(Trajectory { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dynamics_keep_state_constant() {
        let traj = integrate_segment(|_, _, dy| dy.fill(0.0), &[1.0, -2.0], 0.0, 1.0, 0.1, IntegratorConfig::default())
            .unwrap();
        assert_eq!(traj.times.len(), 11);
        assert!(traj.states.iter().all(|s| s == &[1.0, -2.0]));
    }

    #[test]
    fn exponential_decay_is_accurate() {
        let cfg = IntegratorConfig { max_step: 0.1, rtol: 1e-10, atol: 1e-14, min_step: 1e-14 };
        let traj = integrate_segment(|_, y, dy| dy[0] = -2.0 * y[0], &[1.0], 0.0, 3.0, 0.5, cfg).unwrap();
        let last = traj.states.last().unwrap()[0];
        assert!((last - (-6.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn blow_up_is_reported() {
        let cfg = IntegratorConfig { max_step: 0.1, ..Default::default() };
        let r = integrate_segment(|_, y, dy| dy[0] = y[0] * y[0], &[1.0], 0.0, 2.0, 0.1, cfg);
        assert!(r.is_err());
    }

    #[test]
    fn rejects_invalid_span() {
        let r = integrate_segment(|_, _, dy| dy.fill(0.0), &[0.0], 1.0, 0.0, 0.1, IntegratorConfig::default());
        assert!(r.is_err());
        let r = integrate_segment(|_, _, dy| dy.fill(0.0), &[f64::NAN], 0.0, 1.0, 0.1, IntegratorConfig::default());
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }
}
