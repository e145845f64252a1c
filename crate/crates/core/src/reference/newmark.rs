//! Average-acceleration Newmark integration of the structure under an
//! imposed harmonic force, with exact propagation of the discrete
//! sensitivities (monodromy matrix for a full period).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::model::{ExcitationCoupling, Plant};

/// `F̂ cos(Ω t + θ)` applied at the drive point, exciter bypassed.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Forcing {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

impl Forcing {
    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * t + self.phase).cos()
    }

    pub fn period(&self) -> f64 {
        2.0 * core::f64::consts::PI / self.omega
    }
}

/// Result of [`newmark_integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct NewmarkOutput {
    /// State `[η, η̇]` at the end of the span.
    pub end: Vec<f64>,
    /// States at every time level including the start, if requested.
    pub trajectory: Vec<Vec<f64>>,
    /// `∂x(end)/∂x(0)`, if requested.
    pub sensitivity: Option<DMatrix<f64>>,
}

/// Structural matrices of a force-driven plant in modal coordinates.
#[derive(Debug, Clone)]
pub(crate) struct ModalSystem<'a> {
    plant: &'a Plant,
    drive: &'a [f64],
    c: Vec<f64>,
    k: Vec<f64>,
}

impl<'a> ModalSystem<'a> {
    pub(crate) fn new(plant: &'a Plant) -> Result<Self> {
        let ExcitationCoupling::Force { drive_shape } = &plant.coupling else {
            return Err(Error::WrongCoupling("force"));
        };
        let s = &plant.structure;
        let c = s.omega().iter().zip(s.damping()).map(|(w, d)| 2.0 * d * w).collect();
        let k = s.omega().iter().map(|w| w * w).collect();
        Ok(Self { plant, drive: drive_shape, c, k })
    }

    fn modes(&self) -> usize {
        self.k.len()
    }

    /// Nonlinear modal force and its Jacobian.
    fn nonlinear(&self, q: &[f64], force: &mut [f64], jac: Option<&mut DMatrix<f64>>) {
        let sp = &self.plant.spring;
        let x = sp.deflection(q);
        let f = sp.stiffness * x * x * x;
        for (o, p) in force.iter_mut().zip(&sp.shape) {
            *o = p * f;
        }
        if let Some(j) = jac {
            let d = 3.0 * sp.stiffness * x * x;
            let m = self.modes();
            for r in 0..m {
                for c in 0..m {
                    j[(r, c)] = d * sp.shape[r] * sp.shape[c];
                }
            }
        }
    }

    /// Acceleration from dynamic equilibrium.
    fn acceleration(&self, q: &[f64], v: &[f64], p: f64, out: &mut [f64]) {
        let mut d = vec![0.0; self.modes()];
        self.nonlinear(q, &mut d, None);
        for l in 0..self.modes() {
            out[l] = self.drive[l] * p - self.c[l] * v[l] - self.k[l] * q[l] - d[l];
        }
    }
}

/// Integrates `steps` Newmark steps (γ = 1/2, β = 1/4) over `span` seconds
/// from `x0 = [η, η̇]`.
pub fn newmark_integrate(
    plant: &Plant,
    forcing: &Forcing,
    x0: &[f64],
    span: f64,
    steps: usize,
    sensitivity: bool,
    keep_trajectory: bool,
) -> Result<NewmarkOutput> {
    let sys = ModalSystem::new(plant)?;
    let m = sys.modes();
    if x0.len() != 2 * m {
        return Err(invalid("state must be [η, η̇]"));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "Newmark initial state", t: 0.0 });
    }
    if steps == 0 || !(span > 0.0) {
        return Err(invalid("Newmark integration needs a positive span and at least one step"));
    }
    let h = span / steps as f64;
    let mut q = x0[..m].to_vec();
    let mut v = x0[m..].to_vec();
    let mut a = vec![0.0; m];
    sys.acceleration(&q, &v, forcing.value(0.0), &mut a);

    let mut trajectory = Vec::new();
    if keep_trajectory {
        trajectory.reserve(steps + 1);
        trajectory.push(x0.to_vec());
    }
    let mut sens = if sensitivity { Some(DMatrix::<f64>::identity(2 * m, 2 * m)) } else { None };

    let mut d = vec![0.0; m];
    let mut dj = DMatrix::<f64>::zeros(m, m);
    let mut dj_prev = DMatrix::<f64>::zeros(m, m);
    if sensitivity {
        sys.nonlinear(&q, &mut d, Some(&mut dj_prev));
    }
    let mut qn = vec![0.0; m];
    let mut r = DVector::<f64>::zeros(m);
    for n in 0..steps {
        let t1 = (n + 1) as f64 * h;
        let p1 = forcing.value(t1);
        // Predictor: constant acceleration.
        for l in 0..m {
            qn[l] = q[l] + h * v[l] + 0.5 * h * h * a[l];
        }
        let mut converged = false;
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for _ in 0..30 {
            sys.nonlinear(&qn, &mut d, Some(&mut dj));
            let mut scale: f64 = 0.0;
            for l in 0..m {
                let acc = 4.0 * (qn[l] - q[l]) / (h * h) - 4.0 * v[l] / h - a[l];
                let vel = 2.0 * (qn[l] - q[l]) / h - v[l];
                r[l] = acc + sys.c[l] * vel + sys.k[l] * qn[l] + d[l] - sys.drive[l] * p1;
                scale = scale.max(sys.k[l] * qn[l].abs()).max(acc.abs());
            }
            jac.copy_from(&dj);
            for l in 0..m {
                jac[(l, l)] += 4.0 / (h * h) + 2.0 * sys.c[l] / h + sys.k[l];
            }
            let lu = jac.clone().lu();
            let dq = lu.solve(&r).ok_or(Error::Singular("Newmark step Jacobian"))?;
            let mut qnorm: f64 = 0.0;
            let mut dnorm: f64 = 0.0;
            for l in 0..m {
                qn[l] -= dq[l];
                qnorm = qnorm.max(qn[l].abs());
                dnorm = dnorm.max(dq[l].abs());
            }
            if !dnorm.is_finite() {
                return Err(Error::NonFinite { what: "Newmark state", t: t1 });
            }
            if dnorm <= 1e-13 * qnorm.max(1e-300) || r.amax() <= 1e-14 * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence(format!("Newmark step at t = {t1}")));
        }
        let mut vn = vec![0.0; m];
        let mut an = vec![0.0; m];
        for l in 0..m {
            an[l] = 4.0 * (qn[l] - q[l]) / (h * h) - 4.0 * v[l] / h - a[l];
            vn[l] = v[l] + 0.5 * h * (a[l] + an[l]);
        }
        if let Some(s) = sens.as_mut() {
            // Jacobian at the converged state.
            sys.nonlinear(&qn, &mut d, Some(&mut dj));
            let mut jn = dj.clone();
            for l in 0..m {
                jn[(l, l)] += 4.0 / (h * h) + 2.0 * sys.c[l] / h + sys.k[l];
            }
            // ∂r/∂q_n and ∂r/∂v_n with a_n taken from equilibrium.
            let mut rq = dj_prev.clone();
            for r_ in 0..m {
                rq[(r_, r_)] += -4.0 / (h * h) + sys.k[r_] - 2.0 * sys.c[r_] / h;
            }
            let mut rhs = DMatrix::<f64>::zeros(m, 2 * m);
            for r_ in 0..m {
                for c_ in 0..m {
                    rhs[(r_, c_)] = -rq[(r_, c_)];
                }
                rhs[(r_, m + r_)] = 4.0 / h;
            }
            let qz = jn.lu().solve(&rhs).ok_or(Error::Singular("Newmark sensitivity"))?;
            let mut step = DMatrix::<f64>::zeros(2 * m, 2 * m);
            for r_ in 0..m {
                for c_ in 0..2 * m {
                    step[(r_, c_)] = qz[(r_, c_)];
                    let eye_q = if c_ == r_ { 1.0 } else { 0.0 };
                    let eye_v = if c_ == m + r_ { 1.0 } else { 0.0 };
                    step[(m + r_, c_)] = 2.0 / h * (qz[(r_, c_)] - eye_q) - eye_v;
                }
            }
            *s = &step * &*s;
            core::mem::swap(&mut dj_prev, &mut dj);
        }
        q.copy_from_slice(&qn);
        v = vn;
        a = an;
        if keep_trajectory {
            let mut x = q.clone();
            x.extend_from_slice(&v);
            trajectory.push(x);
        }
    }
    let mut end = q;
    end.extend_from_slice(&v);
    Ok(NewmarkOutput { end, trajectory, sensitivity: sens })
}
