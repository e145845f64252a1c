//! Iterative harmonization: Newton/Broyden root finding on the settled
//! excitation spectrum with the voltage Fourier coefficients as unknowns.
//!
//! Unknowns are `[|U_1|, Re U_2, Im U_2, …, Re U_H, Im U_H]` (the phase of
//! `U_1` is pinned to zero), residuals are
//! `[|F_1| − F̂, Re F_2, Im F_2, …, Re F_H, Im F_H]` from the FFT over the
//! hold window.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::model::Plant;
use crate::sim::{half_window_deviation, Clock, ControlConfig, PointFailure, SimConfig, SteppedSineSchedule, VirtualTest};
use crate::spectrum::{window_spectrum, HarmonicSpectrum};

/// Settings of the iterative solver.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterativeOptions {
    /// Termination threshold relative to the target level.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Finite-difference step relative to the current `|U_1|`.
    pub fd_fraction: f64,
    /// Periods integrated per residual evaluation.
    pub hold_periods: usize,
    /// Trailing periods analysed per residual evaluation.
    pub window_periods: usize,
    /// Start each point from the previous point's higher harmonics instead
    /// of zero.
    pub warm_start: bool,
    /// Start each point from the previous point's final Jacobian instead of
    /// a fresh finite-difference build.
    pub reuse_jacobian: bool,
}

impl Default for IterativeOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.005,
            max_iterations: 20,
            fd_fraction: 0.01,
            hold_periods: 200,
            window_periods: 50,
            warm_start: false,
            reuse_jacobian: false,
        }
    }
}

impl IterativeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(invalid("termination threshold must be positive"));
        }
        if !(self.fd_fraction > 0.0) {
            return Err(invalid("finite-difference step must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("at least one iteration must be allowed"));
        }
        if self.window_periods < 2 || self.window_periods > self.hold_periods {
            return Err(invalid("evaluation window must satisfy 2 ≤ window ≤ hold"));
        }
        Ok(())
    }
}

/// Root-finding problem at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeHarmonizationProblem {
    /// Target fundamental level `F̂`.
    pub target: f64,
    /// Truncation order `H`.
    pub order: usize,
    pub options: IterativeOptions,
}

impl IterativeHarmonizationProblem {
    pub fn new(target: f64, order: usize, options: IterativeOptions) -> Result<Self> {
        if !(target > 0.0) {
            return Err(invalid("target level must be positive"));
        }
        if order < 2 {
            return Err(invalid("iterative harmonization needs H ≥ 2"));
        }
        options.validate()?;
        Ok(Self { target, order, options })
    }

    /// `2H − 1`.
    pub fn dimension(&self) -> usize {
        2 * self.order - 1
    }

    /// Absolute termination threshold `ε F̂`.
    pub fn threshold(&self) -> f64 {
        self.options.epsilon * self.target
    }

    /// Voltage spectrum for an unknown vector.
    pub fn command(&self, u: &DVector<f64>) -> HarmonicSpectrum {
        let mut c = HarmonicSpectrum::zeros(self.order);
        c.set(1, Complex64::new(u[0], 0.0));
        for h in 2..=self.order {
            let k = 2 * h - 3;
            c.set(h, Complex64::new(u[k], u[k + 1]));
        }
        c
    }

    /// Unknown vector of a voltage spectrum; the phase of `U_1` is dropped.
    pub fn unknowns(&self, command: &HarmonicSpectrum) -> DVector<f64> {
        let mut u = DVector::zeros(self.dimension());
        u[0] = command.magnitude(1);
        for h in 2..=self.order {
            let k = 2 * h - 3;
            u[k] = command.get(h).re;
            u[k + 1] = command.get(h).im;
        }
        u
    }

    /// Residual of an excitation spectrum.
    pub fn residual(&self, excitation: &HarmonicSpectrum) -> DVector<f64> {
        let mut r = DVector::zeros(self.dimension());
        r[0] = excitation.magnitude(1) - self.target;
        for h in 2..=self.order {
            let k = 2 * h - 3;
            r[k] = excitation.get(h).re;
            r[k + 1] = excitation.get(h).im;
        }
        r
    }

    pub fn converged(&self, residual: &DVector<f64>) -> bool {
        residual.amax() < self.threshold()
    }
}

/// One settled residual evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub residual: DVector<f64>,
    pub excitation: HarmonicSpectrum,
    pub response: HarmonicSpectrum,
    /// First-half/second-half coefficient change over the target.
    pub settle_deviation: f64,
    pub settled: bool,
}

/// Applies the voltage spectrum of `u` open loop, holds until settled and
/// evaluates the residual. The test's controllers must be inactive.
pub fn evaluate_residual(
    test: &mut VirtualTest,
    problem: &IterativeHarmonizationProblem,
    u: &DVector<f64>,
) -> Result<Evaluation> {
    if u.len() != problem.dimension() {
        return Err(invalid(format!("expected {} unknowns", problem.dimension())));
    }
    if test.control().fundamental_enabled || test.harmonizer().is_enabled() {
        return Err(invalid("residual evaluation requires open-loop voltage control"));
    }
    if test.control().order < problem.order {
        return Err(invalid("controller order below the problem order"));
    }
    test.set_command(&problem.command(u));
    let o = &problem.options;
    let data = test.hold(o.hold_periods, o.window_periods)?;
    let n = data.samples_per_period;
    let excitation = window_spectrum(&data.excitation, n, data.tau0, problem.order)?;
    let response = window_spectrum(&data.response, n, data.tau0, problem.order)?;
    let settle_deviation = half_window_deviation(&data, problem.order)? / problem.target;
    Ok(Evaluation {
        residual: problem.residual(&excitation),
        excitation,
        response,
        settle_deviation,
        settled: settle_deviation <= test.config().settle_tolerance,
    })
}

/// Rank-one Broyden update enforcing the secant condition `J Δu = Δr`.
pub fn broyden_update(jacobian: &mut DMatrix<f64>, du: &DVector<f64>, dr: &DVector<f64>) -> Result<()> {
    let den = du.dot(du);
    if !(den > 0.0) {
        return Err(Error::Singular("Broyden update with a zero step"));
    }
    let defect = dr - &*jacobian * du;
    jacobian.ger(1.0 / den, &defect, du, 1.0);
    Ok(())
}

/// How the Jacobian for an iteration was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum JacobianPolicy {
    FiniteDifference,
    Broyden,
    Reused,
}

/// Trace entry for one Newton update.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    /// Residual before the update.
    pub residual: Vec<f64>,
    pub unknowns: Vec<f64>,
    pub policy: JacobianPolicy,
    /// Plant settles spent in this iteration (Jacobian build plus update).
    pub settles: u32,
    pub regularized: bool,
}

/// Result of [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    /// Final unknowns.
    pub unknowns: DVector<f64>,
    pub last: Evaluation,
    /// All plant settles including the initial evaluation.
    pub settles: u32,
    pub jacobian: Option<DMatrix<f64>>,
}

impl SolveTrace {
    pub fn iteration_count(&self) -> usize {
        self.iterations.len()
    }
}

fn finite_difference_jacobian(
    test: &VirtualTest,
    problem: &IterativeHarmonizationProblem,
    u: &DVector<f64>,
    r: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = problem.dimension();
    let step = problem.options.fd_fraction * u[0].abs().max(1e-6);
    let mut j = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut probe = test.clone();
        let mut up = u.clone();
        up[c] += step;
        let e = evaluate_residual(&mut probe, problem, &up)?;
        j.set_column(c, &((e.residual - r) / step));
    }
    Ok(j)
}

fn newton_step(j: &DMatrix<f64>, r: &DVector<f64>) -> Result<(DVector<f64>, bool)> {
    if let Some(d) = j.clone().lu().solve(&(-r)) {
        if d.iter().all(|v| v.is_finite()) {
            return Ok((d, false));
        }
    }
    // One regularized retry.
    let scale = j.norm().max(1e-300);
    let n = j.nrows();
    let lambda = 1e-8 * scale;
    let jt = j.transpose();
    let normal = &jt * j + DMatrix::<f64>::identity(n, n) * (lambda * lambda);
    let d = normal
        .lu()
        .solve(&(-(&jt * r)))
        .filter(|d| d.iter().all(|v| v.is_finite()))
        .ok_or(Error::Singular("iterative harmonization Jacobian"))?;
    Ok((d, true))
}

/// Newton iterations with a finite-difference Jacobian in the first and
/// every second iteration and Broyden updates in between. `test` must be
/// open loop; it ends in the settled state of the last accepted update.
pub fn solve(
    test: &mut VirtualTest,
    problem: &IterativeHarmonizationProblem,
    initial: &DVector<f64>,
    reuse: Option<&DMatrix<f64>>,
) -> Result<SolveTrace> {
    problem.options.validate()?;
    let n = problem.dimension();
    let mut u = initial.clone();
    let mut eval = evaluate_residual(test, problem, &u)?;
    let mut settles = 1u32;
    let mut iterations = Vec::new();
    let mut jac: Option<DMatrix<f64>> = reuse.filter(|j| j.nrows() == n && j.ncols() == n).cloned();
    let mut last_step: Option<(DVector<f64>, DVector<f64>)> = None;
    loop {
        if problem.converged(&eval.residual) {
            return Ok(SolveTrace { iterations, converged: true, unknowns: u, last: eval, settles, jacobian: jac });
        }
        let k = iterations.len();
        if k >= problem.options.max_iterations {
            return Err(Error::NoConvergence(format!(
                "iterative harmonization at Ω = {} exceeded {} iterations (residual {:.3e})",
                test.omega(),
                problem.options.max_iterations,
                eval.residual.amax()
            )));
        }
        let mut spent = 0u32;
        let policy = if k == 0 && jac.is_some() {
            JacobianPolicy::Reused
        } else if k % 2 == 0 {
            jac = Some(finite_difference_jacobian(test, problem, &u, &eval.residual)?);
            spent += n as u32;
            JacobianPolicy::FiniteDifference
        } else {
            let j = jac.as_mut().expect("a Jacobian exists after the first iteration");
            let (du, dr) = last_step.as_ref().expect("a step exists after the first iteration");
            broyden_update(j, du, dr)?;
            JacobianPolicy::Broyden
        };
        let j = jac.as_ref().expect("Jacobian was set above");
        let (du, regularized) = newton_step(j, &eval.residual)?;
        let record_u = u.iter().copied().collect();
        let record_r = eval.residual.iter().copied().collect();
        let un = &u + &du;
        if !(un[0] >= 0.0) {
            return Err(Error::NoConvergence(format!("Newton step at Ω = {} drove |U_1| negative", test.omega())));
        }
        let next = evaluate_residual(test, problem, &un)?;
        spent += 1;
        settles += spent;
        let dr = &next.residual - &eval.residual;
        last_step = Some((du, dr));
        iterations.push(IterationRecord { residual: record_r, unknowns: record_u, policy, settles: spent, regularized });
        u = un;
        eval = next;
    }
}

/// Per-point outcome of [`stepped_sine_iterative`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterativePoint {
    pub omega: f64,
    pub iterations: Vec<IterationRecord>,
    pub command: HarmonicSpectrum,
    pub excitation: HarmonicSpectrum,
    pub response: HarmonicSpectrum,
    pub settled: bool,
    /// Plant settles including the fundamental pre-settle.
    pub settles: u32,
    pub wall_time: f64,
}

impl IterativePoint {
    pub fn iteration_count(&self) -> usize {
        self.iterations.len()
    }

    pub fn distortion(&self, h: usize, target: f64) -> f64 {
        self.excitation.magnitude(h) / target
    }
}

/// Result of an iterative stepped-sine run.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterativeRun {
    pub points: Vec<IterativePoint>,
    pub failures: Vec<PointFailure>,
}

impl IterativeRun {
    pub fn settles(&self) -> u32 {
        self.points.iter().map(|p| p.settles).sum()
    }

    pub fn mean_iterations(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.points.iter().map(|p| p.iterations.len() as f64).sum::<f64>() / self.points.len() as f64
    }
}

/// Stepped sine with iterative harmonization. At each grid point the
/// fundamental controller settles the level with the initial higher
/// harmonics applied, then [`solve`] runs open loop from that `U_1`.
/// Failed points are recorded and the run continues from the restored state.
pub fn stepped_sine_iterative(
    plant: &Plant,
    control: &ControlConfig,
    sim: &SimConfig,
    schedule: &SteppedSineSchedule,
    options: &IterativeOptions,
    clock: &dyn Clock,
) -> Result<IterativeRun> {
    schedule.validate()?;
    let problem = IterativeHarmonizationProblem::new(control.target, control.order, *options)?;
    let mut base = control.clone();
    base.harmonics.clear();
    base.fundamental_enabled = true;
    let mut test = VirtualTest::new(plant.clone(), base, sim.clone(), schedule.frequencies[0])?;
    let ramp = schedule.ramp_periods * 2.0 * PI / plant.structure.omega()[0];
    let mut run = IterativeRun::default();
    let mut higher = HarmonicSpectrum::zeros(control.order);
    let mut jacobian: Option<DMatrix<f64>> = None;
    for (i, &omega) in schedule.frequencies.iter().enumerate() {
        let start = clock.seconds();
        let backup = test.clone();
        let outcome = (|| -> Result<(SolveTrace, u32)> {
            test.set_fundamental_enabled(true);
            let mut cmd = higher.clone();
            cmd.set(1, Complex64::new(test.fundamental().amplitude(), 0.0));
            test.set_command(&cmd);
            if i == 0 {
                test.step_frequency(omega)?;
            } else {
                test.ramp_to(omega, ramp)?;
            }
            test.hold(options.hold_periods, 1)?;
            test.set_fundamental_enabled(false);
            let u0 = problem.unknowns(&test.command());
            let reuse = if options.reuse_jacobian { jacobian.as_ref() } else { None };
            let trace = solve(&mut test, &problem, &u0, reuse)?;
            Ok((trace, 1))
        })();
        match outcome {
            Ok((trace, pre)) => {
                let command = problem.command(&trace.unknowns);
                if options.warm_start {
                    higher = command.clone();
                    higher.set(1, Complex64::new(0.0, 0.0));
                }
                jacobian = trace.jacobian.clone();
                run.points.push(IterativePoint {
                    omega,
                    iterations: trace.iterations,
                    command,
                    excitation: trace.last.excitation,
                    response: trace.last.response,
                    settled: trace.last.settled,
                    settles: trace.settles + pre,
                    wall_time: clock.seconds() - start,
                });
            }
            Err(e) => {
                log::warn!("iterative point at Ω = {omega} failed: {e}");
                run.failures.push(PointFailure { omega, message: e.to_string() });
                if schedule.abort_on_failure {
                    return Err(e);
                }
                test = backup;
                test.step_frequency(omega)?;
            }
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{default_control, shaw_beam_plant, SHAW_EXCITER};

    fn problem() -> IterativeHarmonizationProblem {
        IterativeHarmonizationProblem::new(2.0, 4, IterativeOptions::default()).unwrap()
    }

    #[test]
    fn unknowns_round_trip() {
        let p = problem();
        let u = DVector::from_vec(alloc::vec![1.5, 0.1, -0.2, 0.3, 0.4, -0.5, 0.6]);
        assert_eq!(p.unknowns(&p.command(&u)), u);
    }

    #[test]
    fn broyden_secant_condition() {
        let mut j = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.0, -0.3, 1.0, 0.5, 0.2, 0.0, 3.0]);
        let du = DVector::from_vec(alloc::vec![0.3, -1.2, 0.7]);
        let dr = DVector::from_vec(alloc::vec![1.0, 0.25, -2.0]);
        broyden_update(&mut j, &du, &dr).unwrap();
        let err = (&j * &du - &dr).amax();
        assert!(err <= 8.0 * f64::EPSILON * dr.amax(), "secant defect {err}");
    }

    #[test]
    fn evaluation_needs_open_loop() {
        let c = default_control(&SHAW_EXCITER);
        let mut t = VirtualTest::new(shaw_beam_plant("x1").unwrap(), c, SimConfig::new("x3"), 50.0).unwrap();
        let p = problem();
        let u = DVector::zeros(p.dimension());
        assert!(evaluate_residual(&mut t, &p, &u).is_err());
    }

    #[test]
    fn option_validation() {
        let o = IterativeOptions { window_periods: 500, ..Default::default() };
        assert!(o.validate().is_err());
        assert!(IterativeHarmonizationProblem::new(2.0, 1, IterativeOptions::default()).is_err());
    }
}
