//! Time-domain plant: modal structure, electrodynamic exciter, cubic spring
//! and the force- or base-excitation coupling.
//!
//! State layout: `[η_1..η_M, η̇_1..η̇_M]`, followed by `[q_b, q̇_b]` for base
//! drive. Modal coordinates are mass-normalized.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};

/// Named row of the mode-shape matrix (1/√kg per mode).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Location {
    pub name: String,
    pub shape: Vec<f64>,
}

/// Linear modal model of the structure under test.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModalStructure {
    omega: Vec<f64>,
    damping: Vec<f64>,
    locations: Vec<Location>,
}

impl ModalStructure {
    pub fn new(omega: Vec<f64>, damping: Vec<f64>, locations: Vec<Location>) -> Result<Self> {
        let m = omega.len();
        if m == 0 {
            return Err(invalid("structure needs at least one mode"));
        }
        if damping.len() != m {
            return Err(invalid("damping ratios must match the number of modes"));
        }
        if omega.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("modal frequencies must be positive"));
        }
        if damping.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
            return Err(invalid("modal damping ratios must lie in (0, 1)"));
        }
        for loc in &locations {
            if loc.shape.len() != m {
                return Err(invalid(alloc::format!(
                    "location `{}` has {} shape entries, expected {m}",
                    loc.name,
                    loc.shape.len()
                )));
            }
            if loc.shape.iter().any(|v| !v.is_finite()) {
                return Err(invalid(alloc::format!("location `{}` has non-finite shape", loc.name)));
            }
        }
        Ok(Self { omega, damping, locations })
    }

    pub fn modes(&self) -> usize {
        self.omega.len()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn damping(&self) -> &[f64] {
        &self.damping
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    /// Mode-shape row of a named location.
    pub fn shape(&self, location: &str) -> Result<&[f64]> {
        self.locations
            .iter()
            .find(|l| l.name == location)
            .map(|l| l.shape.as_slice())
            .ok_or_else(|| Error::UnknownLocation(location.to_string()))
    }
}

/// Electrodynamic exciter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Exciter {
    /// Moving (armature) mass, kg.
    pub mass: f64,
    /// Coil resistance, Ω.
    pub resistance: f64,
    /// Force constant, N/A.
    pub force_constant: f64,
    /// Natural frequency, rad/s.
    pub omega: f64,
    /// Damping ratio.
    pub damping: f64,
}

impl Exciter {
    pub fn validate(&self) -> Result<()> {
        let all = [self.mass, self.resistance, self.force_constant, self.omega, self.damping];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("exciter parameters must be finite and positive"));
        }
        Ok(())
    }

    /// Voltage-to-force gain `G/R` in N/V.
    pub fn voltage_gain(&self) -> f64 {
        self.force_constant / self.resistance
    }
}

/// Cubic spring `k_nl x³` acting on the deflection `x = Σ φ_nl,n η_n`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CubicSpring {
    /// Cubic stiffness, N/m³.
    pub stiffness: f64,
    /// Mode shape at the attachment point.
    pub shape: Vec<f64>,
}

impl CubicSpring {
    pub fn none(modes: usize) -> Self {
        Self { stiffness: 0.0, shape: vec![0.0; modes] }
    }

    #[inline]
    pub fn deflection(&self, eta: &[f64]) -> f64 {
        self.shape.iter().zip(eta).map(|(p, e)| p * e).sum()
    }

    /// Modal restoring force `d_ℓ = φ_nl,ℓ k_nl x³`.
    #[inline]
    pub fn modal_force(&self, eta: &[f64], mode: usize) -> f64 {
        let x = self.deflection(eta);
        self.shape[mode] * self.stiffness * x * x * x
    }
}

/// How the exciter drives the structure.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ExcitationCoupling {
    /// Force through a rigid stinger; drive-point mode shape (1/√kg).
    Force { drive_shape: Vec<f64> },
    /// Structure mounted on the armature; modal participation `bᵀMφ_ℓ` (√kg).
    Base { participation: Vec<f64> },
}

impl ExcitationCoupling {
    pub fn coefficients(&self) -> &[f64] {
        match self {
            Self::Force { drive_shape } => drive_shape,
            Self::Base { participation } => participation,
        }
    }

    pub fn is_base(&self) -> bool {
        matches!(self, Self::Base { .. })
    }
}

/// Plant state vector with its layout.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlantState {
    pub values: Vec<f64>,
    modes: usize,
}

impl PlantState {
    pub fn zeros(plant: &Plant) -> Self {
        Self { values: vec![0.0; plant.state_len()], modes: plant.modes() }
    }

    pub fn from_values(plant: &Plant, values: Vec<f64>) -> Result<Self> {
        if values.len() != plant.state_len() {
            return Err(invalid("state length does not match the plant"));
        }
        Ok(Self { values, modes: plant.modes() })
    }

    pub fn eta(&self) -> &[f64] {
        &self.values[..self.modes]
    }

    pub fn eta_dot(&self) -> &[f64] {
        &self.values[self.modes..2 * self.modes]
    }

    pub fn eta_mut(&mut self) -> &mut [f64] {
        &mut self.values[..self.modes]
    }

    pub fn eta_dot_mut(&mut self) -> &mut [f64] {
        let m = self.modes;
        &mut self.values[m..2 * m]
    }

    /// Base displacement and velocity, when present.
    pub fn base(&self) -> Option<(f64, f64)> {
        let m = self.modes;
        (self.values.len() == 2 * m + 2).then(|| (self.values[2 * m], self.values[2 * m + 1]))
    }
}

/// Kinematic quantity read at a location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Quantity {
    Displacement,
    Velocity,
}

/// Complete exciter-structure system.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Plant {
    pub structure: ModalStructure,
    pub exciter: Exciter,
    pub spring: CubicSpring,
    pub coupling: ExcitationCoupling,
}

impl Plant {
    pub fn new(
        structure: ModalStructure,
        exciter: Exciter,
        spring: CubicSpring,
        coupling: ExcitationCoupling,
    ) -> Result<Self> {
        exciter.validate()?;
        let m = structure.modes();
        if spring.shape.len() != m {
            return Err(invalid("cubic spring shape must have one entry per mode"));
        }
        if !(spring.stiffness >= 0.0 && spring.stiffness.is_finite()) {
            return Err(invalid("cubic stiffness must be finite and non-negative"));
        }
        if coupling.coefficients().len() != m {
            return Err(invalid("coupling coefficients must have one entry per mode"));
        }
        if let ExcitationCoupling::Base { participation } = &coupling {
            let sum: f64 = participation.iter().map(|g| g * g).sum();
            if sum >= exciter.mass {
                return Err(invalid(
                    "base drive requires the moving mass to exceed Σ(bᵀMφ)² (rigid-body mass included)",
                ));
            }
        }
        Ok(Self { structure, exciter, spring, coupling })
    }

    pub fn modes(&self) -> usize {
        self.structure.modes()
    }

    pub fn state_len(&self) -> usize {
        2 * self.modes() + if self.coupling.is_base() { 2 } else { 0 }
    }

    /// Uncoupled modal acceleration `−2Dωη̇ − ω²η − d` of mode `l`.
    #[inline]
    fn free_acceleration(&self, y: &[f64], l: usize, cubic: f64) -> f64 {
        let m = self.modes();
        let w = self.structure.omega[l];
        let d = self.structure.damping[l];
        -2.0 * d * w * y[m + l] - w * w * y[l] - self.spring.shape[l] * cubic
    }

    #[inline]
    fn cubic(&self, y: &[f64]) -> f64 {
        if self.spring.stiffness == 0.0 {
            return 0.0;
        }
        let x = self.spring.deflection(&y[..self.modes()]);
        self.spring.stiffness * x * x * x
    }

    /// Applied excitation: force `f` (N) for force drive, base acceleration
    /// `q̈_b` (m/s²) for base drive.
    #[inline]
    pub fn excitation(&self, u: f64, y: &[f64]) -> f64 {
        let cubic = self.cubic(y);
        match &self.coupling {
            ExcitationCoupling::Force { drive_shape } => self.force_raw(u, y, drive_shape, cubic),
            ExcitationCoupling::Base { participation } => self.base_accel_raw(u, y, participation, cubic),
        }
    }

    #[inline]
    fn force_raw(&self, u: f64, y: &[f64], phi: &[f64], cubic: f64) -> f64 {
        let ex = &self.exciter;
        let m = self.modes();
        let mut g = 0.0;
        let mut q = 0.0;
        let mut qd = 0.0;
        let mut phi_sq = 0.0;
        for (l, p) in phi.iter().enumerate() {
            g += p * self.free_acceleration(y, l, cubic);
            q += p * y[l];
            qd += p * y[m + l];
            phi_sq += p * p;
        }
        let num = ex.voltage_gain() * u
            - ex.mass * (g + 2.0 * ex.damping * ex.omega * qd + ex.omega * ex.omega * q);
        num / (1.0 + ex.mass * phi_sq)
    }

    #[inline]
    fn base_accel_raw(&self, u: f64, y: &[f64], gamma: &[f64], cubic: f64) -> f64 {
        let ex = &self.exciter;
        let m = self.modes();
        let (qb, qbd) = (y[2 * m], y[2 * m + 1]);
        let mut coupled = 0.0;
        let mut gamma_sq = 0.0;
        for (l, g) in gamma.iter().enumerate() {
            coupled += g * self.free_acceleration(y, l, cubic);
            gamma_sq += g * g;
        }
        let num = ex.voltage_gain() * u
            - ex.mass * (2.0 * ex.damping * ex.omega * qbd + ex.omega * ex.omega * qb)
            - coupled;
        num / (ex.mass - gamma_sq)
    }

    /// Force delivered by the exciter through the stinger.
    pub fn applied_force(&self, u: f64, state: &PlantState) -> Result<f64> {
        match &self.coupling {
            ExcitationCoupling::Force { drive_shape } => {
                Ok(self.force_raw(u, &state.values, drive_shape, self.cubic(&state.values)))
            }
            ExcitationCoupling::Base { .. } => Err(Error::WrongCoupling("force")),
        }
    }

    /// Modal restoring forces of the cubic spring.
    pub fn nonlinear_modal_force(&self, eta: &[f64]) -> Vec<f64> {
        (0..self.modes()).map(|l| self.spring.modal_force(eta, l)).collect()
    }

    /// First-order state derivative into `dy`; returns the applied excitation.
    #[inline]
    pub fn derivative_into(&self, u: f64, y: &[f64], dy: &mut [f64]) -> f64 {
        let m = self.modes();
        let cubic = self.cubic(y);
        dy[..m].copy_from_slice(&y[m..2 * m]);
        match &self.coupling {
            ExcitationCoupling::Force { drive_shape } => {
                let f = self.force_raw(u, y, drive_shape, cubic);
                for l in 0..m {
                    dy[m + l] = self.free_acceleration(y, l, cubic) + drive_shape[l] * f;
                }
                f
            }
            ExcitationCoupling::Base { participation } => {
                let a = self.base_accel_raw(u, y, participation, cubic);
                for l in 0..m {
                    dy[m + l] = self.free_acceleration(y, l, cubic) - participation[l] * a;
                }
                dy[2 * m] = y[2 * m + 1];
                dy[2 * m + 1] = a;
                a
            }
        }
    }

    /// State derivative; fails on a non-finite state.
    pub fn state_derivative(&self, u: f64, state: &PlantState) -> Result<PlantState> {
        if state.values.iter().any(|v| !v.is_finite()) || !u.is_finite() {
            return Err(Error::NonFinite { what: "plant state", t: f64::NAN });
        }
        let mut dy = vec![0.0; state.values.len()];
        self.derivative_into(u, &state.values, &mut dy);
        Ok(PlantState { values: dy, modes: self.modes() })
    }

    /// Displacement or velocity at a named location. `absolute` adds the base
    /// motion for base drive.
    pub fn observe(
        &self,
        state: &PlantState,
        location: &str,
        quantity: Quantity,
        absolute: bool,
    ) -> Result<f64> {
        let shape = self.structure.shape(location)?;
        Ok(self.observe_shape(&state.values, shape, quantity, absolute))
    }

    #[inline]
    pub fn observe_shape(&self, y: &[f64], shape: &[f64], quantity: Quantity, absolute: bool) -> f64 {
        let m = self.modes();
        let offset = match quantity {
            Quantity::Displacement => 0,
            Quantity::Velocity => m,
        };
        let mut v: f64 = shape.iter().enumerate().map(|(l, p)| p * y[offset + l]).sum();
        if absolute && self.coupling.is_base() {
            v += y[2 * m + offset / m];
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::shaw_beam_plant;

    fn linear_single_mode(mass: f64) -> Plant {
        let s = ModalStructure::new(
            vec![10.0],
            vec![0.05],
            vec![Location { name: "tip".into(), shape: vec![1.0] }],
        )
        .unwrap();
        let ex = Exciter { mass, resistance: 2.0, force_constant: 4.0, omega: 30.0, damping: 0.3 };
        Plant::new(s, ex, CubicSpring::none(1), ExcitationCoupling::Force { drive_shape: vec![0.5] }).unwrap()
    }

    #[test]
    fn nonlinear_force_arithmetic() {
        let plant = shaw_beam_plant("x1").unwrap();
        assert_eq!(plant.nonlinear_modal_force(&[0.0, 0.0]), vec![0.0, 0.0]);
        let d = plant.nonlinear_modal_force(&[1e-3, 0.0]);
        let x = 5.34e-3;
        let expected = [5.34 * 2.517e6 * x * x * x, 4.67 * 2.517e6 * x * x * x];
        for (a, b) in d.iter().zip(expected) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
        let mut lin = plant.clone();
        lin.spring.stiffness = 0.0;
        assert_eq!(lin.nonlinear_modal_force(&[0.3, -0.2]), vec![0.0, 0.0]);
    }

    #[test]
    fn static_force_uses_mass_ratio_denominator() {
        let plant = shaw_beam_plant("x1").unwrap();
        let state = PlantState::zeros(&plant);
        assert_eq!(plant.applied_force(0.0, &state).unwrap(), 0.0);
        let f = plant.applied_force(1.0, &state).unwrap();
        let expected = (6.78 / 2.0) / (1.0 + 0.057 * (0.125f64.powi(2) + 0.575f64.powi(2)));
        assert!((f - expected).abs() < 1e-14);
    }

    #[test]
    fn massless_armature_passes_voltage_through() {
        let plant = linear_single_mode(1e-300);
        let mut state = PlantState::zeros(&plant);
        state.values = vec![0.3, -2.0];
        let f = plant.applied_force(1.5, &state).unwrap();
        assert!((f - 3.0).abs() < 1e-12);
    }

    #[test]
    fn algebraic_loop_residual_vanishes() {
        let plant = shaw_beam_plant("x2").unwrap();
        let mut state = PlantState::zeros(&plant);
        state.values = vec![2e-3, -1e-3, 0.4, 0.9];
        let u = 0.7;
        let f = plant.applied_force(u, &state).unwrap();
        let dy = plant.state_derivative(u, &state).unwrap();
        let ExcitationCoupling::Force { drive_shape } = &plant.coupling else { unreachable!() };
        let ex = plant.exciter;
        let q: f64 = drive_shape.iter().zip(state.eta()).map(|(p, e)| p * e).sum();
        let qd: f64 = drive_shape.iter().zip(state.eta_dot()).map(|(p, e)| p * e).sum();
        let qdd: f64 = drive_shape.iter().zip(dy.eta_dot()).map(|(p, e)| p * e).sum();
        let rhs = ex.voltage_gain() * u
            - ex.mass * (qdd + 2.0 * ex.damping * ex.omega * qd + ex.omega * ex.omega * q);
        assert!((f - rhs).abs() <= 1e-12 * f.abs().max(1.0));
        let d = plant.nonlinear_modal_force(state.eta());
        for l in 0..2 {
            let w = plant.structure.omega()[l];
            let z = plant.structure.damping()[l];
            let lhs = dy.eta_dot()[l] + 2.0 * z * w * state.eta_dot()[l] + w * w * state.eta()[l] + d[l];
            assert!((lhs - drive_shape[l] * f).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn base_drive_rejects_force_query_and_decouples_with_zero_participation() {
        let mut plant = shaw_beam_plant("x1").unwrap();
        plant.coupling = ExcitationCoupling::Base { participation: vec![0.0, 0.0] };
        let mut state = PlantState::zeros(&plant);
        assert_eq!(state.values.len(), 6);
        assert!(matches!(plant.applied_force(1.0, &state), Err(Error::WrongCoupling(_))));
        state.values = vec![0.0, 0.0, 0.0, 0.0, 0.1, 0.2];
        let dy = plant.state_derivative(3.0, &state).unwrap();
        assert_eq!(&dy.values[..4], &[0.0; 4]);
        let ex = plant.exciter;
        let a = (ex.voltage_gain() * 3.0
            - ex.mass * (2.0 * ex.damping * ex.omega * 0.2 + ex.omega * ex.omega * 0.1))
            / ex.mass;
        assert!((dy.values[5] - a).abs() < 1e-9 * a.abs());
    }

    #[test]
    fn base_drive_loop_is_consistent() {
        let mut plant = shaw_beam_plant("x1").unwrap();
        let gamma = vec![0.05, -0.02];
        plant.exciter.mass = 0.5;
        plant.coupling = ExcitationCoupling::Base { participation: gamma.clone() };
        let mut state = PlantState::zeros(&plant);
        state.values = vec![1e-3, 2e-4, -0.1, 0.05, 1e-4, -3e-3];
        let u = 1.3;
        let dy = plant.state_derivative(u, &state).unwrap();
        let a = dy.values[5];
        let ex = plant.exciter;
        let inertia: f64 = gamma.iter().zip(dy.eta_dot()).map(|(g, e)| g * e).sum();
        let lhs = ex.mass * (a + 2.0 * ex.damping * ex.omega * state.values[5] + ex.omega * ex.omega * state.values[4])
            + inertia;
        assert!((lhs - ex.voltage_gain() * u).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn rejects_base_mass_below_participation() {
        let mut plant = shaw_beam_plant("x1").unwrap();
        plant.exciter.mass = 0.001;
        let r = Plant::new(
            plant.structure.clone(),
            plant.exciter,
            plant.spring.clone(),
            ExcitationCoupling::Base { participation: vec![0.05, 0.0] },
        );
        assert!(r.is_err());
    }

    #[test]
    fn observation_rows() {
        let plant = shaw_beam_plant("x1").unwrap();
        let mut state = PlantState::zeros(&plant);
        assert_eq!(plant.observe(&state, "x3", Quantity::Displacement, false).unwrap(), 0.0);
        state.values[0] = 1.0;
        assert!((plant.observe(&state, "x3", Quantity::Displacement, false).unwrap() - 5.13).abs() < 1e-15);
        state.values[1] = 1.0;
        let v = plant.observe(&state, "x4", Quantity::Displacement, false).unwrap();
        assert!((v - 10.01).abs() < 1e-12);
        assert!(matches!(
            plant.observe(&state, "x9", Quantity::Displacement, false),
            Err(Error::UnknownLocation(_))
        ));
    }

    #[test]
    fn non_finite_state_is_an_error() {
        let plant = shaw_beam_plant("x1").unwrap();
        let mut state = PlantState::zeros(&plant);
        state.values[2] = f64::NAN;
        assert!(matches!(plant.state_derivative(0.0, &state), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn structure_validation() {
        assert!(ModalStructure::new(vec![], vec![], vec![]).is_err());
        assert!(ModalStructure::new(vec![1.0], vec![1.2], vec![]).is_err());
        assert!(ModalStructure::new(vec![-1.0], vec![0.1], vec![]).is_err());
        assert!(ModalStructure::new(
            vec![1.0],
            vec![0.1],
            vec![Location { name: "a".into(), shape: vec![1.0, 2.0] }]
        )
        .is_err());
    }
}
