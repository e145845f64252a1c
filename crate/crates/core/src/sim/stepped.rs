//! Stepped-sine test protocol and per-point post-processing.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::model::Plant;
use crate::sim::config::{ControlConfig, SimConfig};
use crate::sim::engine::{HoldData, VirtualTest};
use crate::spectrum::{window_spectrum, HarmonicSpectrum};

/// Grid traversal direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Direction {
    Forward,
    Backward,
}

/// Sudden frequency and voltage step used to reach an isolated branch.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JumpPlan {
    /// Grid index after whose hold the jump is made.
    pub after: usize,
    pub delta_omega: f64,
    pub delta_voltage: f64,
    /// Frequencies visited on the new branch after landing.
    pub continuation: Vec<f64>,
    /// Optional landing check.
    pub classifier: Option<BranchClassifier>,
}

/// Stepped-sine protocol.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SteppedSineSchedule {
    /// Grid in rad/s.
    pub frequencies: Vec<f64>,
    /// Ramp duration in periods of the first structural mode.
    pub ramp_periods: f64,
    pub hold_periods: usize,
    pub window_periods: usize,
    pub direction: Direction,
    /// Abort on the first failed point instead of restoring and continuing.
    pub abort_on_failure: bool,
    pub jump: Option<JumpPlan>,
}

impl SteppedSineSchedule {
    pub fn new(frequencies: Vec<f64>, direction: Direction) -> Self {
        Self {
            frequencies,
            ramp_periods: 10.0,
            hold_periods: 600,
            window_periods: 300,
            direction,
            abort_on_failure: false,
            jump: None,
        }
    }

    /// Evenly spaced grid between `from` and `to` (inclusive).
    pub fn linear(from: f64, to: f64, points: usize) -> Self {
        let direction = if to >= from { Direction::Forward } else { Direction::Backward };
        let freqs = if points <= 1 {
            alloc::vec![from]
        } else {
            (0..points).map(|k| from + (to - from) * k as f64 / (points - 1) as f64).collect()
        };
        Self::new(freqs, direction)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.is_empty() {
            return Err(invalid("frequency grid is empty"));
        }
        if self.frequencies.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("grid frequencies must be positive"));
        }
        let monotone = self.frequencies.windows(2).all(|p| match self.direction {
            Direction::Forward => p[1] > p[0],
            Direction::Backward => p[1] < p[0],
        });
        if !monotone {
            return Err(invalid("frequency grid is not monotone in the chosen direction"));
        }
        if !(self.ramp_periods > 0.0) {
            return Err(invalid("ramp duration must be positive"));
        }
        if self.window_periods == 0 || self.window_periods > self.hold_periods {
            return Err(invalid("window must satisfy 0 < window ≤ hold"));
        }
        if let Some(j) = &self.jump {
            if j.after >= self.frequencies.len() {
                return Err(invalid("jump index outside the grid"));
            }
            if !(j.delta_omega.is_finite() && j.delta_voltage.is_finite()) {
                return Err(invalid("jump steps must be finite"));
            }
            if j.continuation.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(invalid("continuation frequencies must be positive"));
            }
        }
        Ok(())
    }
}

/// Branch decision from the fundamental response amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BranchClassifier {
    /// Response H1 amplitude of the low branch at the landing frequency.
    pub low: f64,
    /// Response H1 amplitude of the high (isolated) branch.
    pub high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Branch {
    Low,
    High,
}

impl BranchClassifier {
    pub fn classify(&self, amplitude: f64) -> Branch {
        if amplitude > 0.5 * (self.low + self.high) {
            Branch::High
        } else {
            Branch::Low
        }
    }
}

/// Role of a point within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PointKind {
    Main,
    Jump,
    Continuation,
}

/// Post-processed hold phase.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointRecord {
    pub omega: f64,
    pub kind: PointKind,
    /// FFT of the excitation over the window.
    pub excitation: HarmonicSpectrum,
    /// Adaptive filter estimate at the end of the hold.
    pub estimate: HarmonicSpectrum,
    /// FFT of the observed displacement.
    pub response: HarmonicSpectrum,
    /// Applied voltage spectrum at the end of the hold.
    pub command: HarmonicSpectrum,
    /// Harmonizer integrator states `I_h` (index = harmonic).
    pub integrators: HarmonicSpectrum,
    /// Largest first-half/second-half excitation coefficient change over the
    /// target level.
    pub settle_deviation: f64,
    pub settled: bool,
    /// Response deviation from its period-average waveform, relative RMS.
    pub aperiodicity: f64,
    pub periodic: bool,
    /// Filter fluctuation metric per harmonic over the window.
    pub fluctuation: Vec<f64>,
    pub clipped: bool,
    pub branch: Option<Branch>,
    /// Plant settles spent on the point.
    pub settles: u32,
    pub wall_time: f64,
    /// Plant state and phase at the end of the hold.
    pub end_state: Vec<f64>,
    pub end_phase: f64,
}

impl PointRecord {
    /// Excitation harmonic `h` relative to the target.
    pub fn distortion(&self, h: usize, target: f64) -> f64 {
        self.excitation.magnitude(h) / target
    }

    /// Phase `θ` such that the fundamental excitation continues as
    /// `|F_1| cos(Ω t' + θ)` from the end of the hold (`t' = 0`).
    pub fn forcing_phase(&self) -> f64 {
        let f1 = self.excitation.get(1);
        crate::spectrum::wrap_phase(self.end_phase + f1.im.atan2(f1.re))
    }
}

/// Failed grid point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointFailure {
    pub omega: f64,
    pub message: String,
}

/// Result of a stepped-sine run.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunRecord {
    pub points: Vec<PointRecord>,
    pub failures: Vec<PointFailure>,
}

impl RunRecord {
    pub fn settles(&self) -> u32 {
        self.points.iter().map(|p| p.settles).sum()
    }

    pub fn of_kind(&self, kind: PointKind) -> impl Iterator<Item = &PointRecord> {
        self.points.iter().filter(move |p| p.kind == kind)
    }
}

/// Wall-clock source; the core has none of its own.
pub trait Clock {
    /// Seconds since an arbitrary origin.
    fn seconds(&self) -> f64;
}

/// Clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

/// Thresholds applied when turning a hold into a [`PointRecord`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCriteria {
    pub order: usize,
    pub target: f64,
    pub settle_tolerance: f64,
    pub aperiodicity_limit: f64,
}

impl PointCriteria {
    pub fn new(control: &ControlConfig, sim: &SimConfig) -> Self {
        Self {
            order: control.order,
            target: control.target,
            settle_tolerance: sim.settle_tolerance,
            aperiodicity_limit: sim.aperiodicity_limit,
        }
    }
}

/// Settle deviation between the first and second half of the window.
pub fn half_window_deviation(data: &HoldData, order: usize) -> Result<f64> {
    let n = data.samples_per_period;
    let half = data.window_periods / 2;
    if half == 0 {
        return Ok(0.0);
    }
    let len = data.excitation.len();
    let a = window_spectrum(&data.excitation[len - 2 * half * n..len - half * n], n, data.tau0, order)?;
    let b = window_spectrum(&data.excitation[len - half * n..], n, data.tau0, order)?;
    Ok((0..=order).map(|h| (a.get(h) - b.get(h)).norm()).fold(0.0, f64::max))
}

/// Relative RMS deviation of a windowed signal from its period-average
/// waveform; zero for an exactly periodic signal.
pub fn aperiodicity(samples: &[f64], samples_per_period: usize) -> f64 {
    let n = samples_per_period;
    let periods = samples.len() / n;
    if periods < 2 {
        return 0.0;
    }
    let mut mean = alloc::vec![0.0; n];
    for chunk in samples.chunks_exact(n) {
        for (m, x) in mean.iter_mut().zip(chunk) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= periods as f64);
    let mut dev = 0.0;
    let mut total = 0.0;
    for chunk in samples.chunks_exact(n) {
        for (m, x) in mean.iter().zip(chunk) {
            dev += (x - m) * (x - m);
            total += x * x;
        }
    }
    if total > 0.0 {
        (dev / total).sqrt()
    } else {
        0.0
    }
}

/// Post-processes one hold.
pub fn analyze_hold(
    data: &HoldData,
    test: &VirtualTest,
    criteria: &PointCriteria,
    kind: PointKind,
) -> Result<PointRecord> {
    let n = data.samples_per_period;
    let order = criteria.order;
    let excitation = window_spectrum(&data.excitation, n, data.tau0, order)?;
    let response = window_spectrum(&data.response, n, data.tau0, order)?;
    let settle_deviation = half_window_deviation(data, order)? / criteria.target;
    let aper = aperiodicity(&data.response, n);
    let window_seconds = data.window_periods as f64 * n as f64 * data.dt;
    let fluctuation = if data.window_periods >= 5 {
        data.history.fluctuation(window_seconds, data.omega)?
    } else {
        Vec::new()
    };
    let mut integrators = HarmonicSpectrum::zeros(order);
    for &h in test.harmonizer().harmonics() {
        integrators.set(h, test.harmonizer().integrator(h));
    }
    Ok(PointRecord {
        omega: data.omega,
        kind,
        excitation,
        estimate: test.estimate().clone(),
        response,
        command: test.command(),
        integrators,
        settle_deviation,
        settled: settle_deviation <= criteria.settle_tolerance,
        aperiodicity: aper,
        periodic: aper <= criteria.aperiodicity_limit,
        fluctuation,
        clipped: data.clipped,
        branch: None,
        settles: 1,
        wall_time: 0.0,
        end_state: test.state().to_vec(),
        end_phase: test.phase(),
    })
}

/// Ramps (unless first) and holds at `omega`, records the point and restores
/// the pre-point state on failure.
fn visit(
    test: &mut VirtualTest,
    record: &mut RunRecord,
    omega: f64,
    ramp: Option<f64>,
    schedule: &SteppedSineSchedule,
    criteria: &PointCriteria,
    kind: PointKind,
    clock: &dyn Clock,
    observer: &mut dyn FnMut(&PointRecord, &HoldData),
) -> Result<bool> {
    let start = clock.seconds();
    let backup = test.clone();
    let outcome = (|| {
        if let Some(d) = ramp {
            test.ramp_to(omega, d)?;
        } else {
            test.step_frequency(omega)?;
        }
        let data = test.hold(schedule.hold_periods, schedule.window_periods)?;
        analyze_hold(&data, test, criteria, kind).map(|p| (p, data))
    })();
    match outcome {
        Ok((mut p, data)) => {
            p.wall_time = clock.seconds() - start;
            observer(&p, &data);
            record.points.push(p);
            Ok(true)
        }
        Err(e) => {
            log::warn!("point at Ω = {omega} failed: {e}");
            record.failures.push(PointFailure { omega, message: e.to_string() });
            if schedule.abort_on_failure {
                return Err(e);
            }
            *test = backup;
            Ok(false)
        }
    }
}

/// Runs the schedule from rest: the first grid point is held without a
/// ramp, later points are reached by half-cosine ramps with the state
/// carried over. With a jump plan, grid points after the jump index are
/// replaced by the jump and its continuation frequencies.
pub fn run_stepped_sine(
    plant: &Plant,
    control: &ControlConfig,
    sim: &SimConfig,
    schedule: &SteppedSineSchedule,
    clock: &dyn Clock,
) -> Result<RunRecord> {
    schedule.validate()?;
    let mut test = VirtualTest::new(plant.clone(), control.clone(), sim.clone(), schedule.frequencies[0])?;
    run_with(&mut test, schedule, clock)
}

/// As [`run_stepped_sine`] on an existing test (state carried over).
pub fn run_with(test: &mut VirtualTest, schedule: &SteppedSineSchedule, clock: &dyn Clock) -> Result<RunRecord> {
    run_observed(test, schedule, clock, &mut |_, _| {})
}

/// As [`run_with`], handing every recorded point and its hold data to
/// `observer` (e.g. for time-series export).
pub fn run_observed(
    test: &mut VirtualTest,
    schedule: &SteppedSineSchedule,
    clock: &dyn Clock,
    observer: &mut dyn FnMut(&PointRecord, &HoldData),
) -> Result<RunRecord> {
    schedule.validate()?;
    let criteria = PointCriteria::new(test.control(), test.config());
    let ramp = schedule.ramp_periods * 2.0 * PI / test.plant().structure.omega()[0];
    let mut record = RunRecord::default();
    let last = schedule.jump.as_ref().map_or(schedule.frequencies.len() - 1, |j| j.after);
    for (i, &omega) in schedule.frequencies[..=last].iter().enumerate() {
        let r = if i == 0 && test.time() == 0.0 { None } else { Some(ramp) };
        visit(test, &mut record, omega, r, schedule, &criteria, PointKind::Main, clock, observer)?;
    }
    if let Some(plan) = &schedule.jump {
        jump_observed(test, &mut record, plan, schedule, clock, observer)?;
    }
    Ok(record)
}

/// Applies the frequency and voltage step, holds, classifies the landing
/// point and continues over the plan's frequencies.
pub fn jump_to_isola(
    test: &mut VirtualTest,
    record: &mut RunRecord,
    plan: &JumpPlan,
    schedule: &SteppedSineSchedule,
    clock: &dyn Clock,
) -> Result<Option<Branch>> {
    jump_observed(test, record, plan, schedule, clock, &mut |_, _| {})
}

fn jump_observed(
    test: &mut VirtualTest,
    record: &mut RunRecord,
    plan: &JumpPlan,
    schedule: &SteppedSineSchedule,
    clock: &dyn Clock,
    observer: &mut dyn FnMut(&PointRecord, &HoldData),
) -> Result<Option<Branch>> {
    let criteria = PointCriteria::new(test.control(), test.config());
    let omega = test.omega() + plan.delta_omega;
    if !(omega > 0.0) {
        return Err(invalid(format!("jump leads to non-positive frequency {omega}")));
    }
    let u1 = test.fundamental().amplitude() + plan.delta_voltage;
    test.fundamental_mut().set_amplitude(u1);
    let mut cmd = test.command();
    cmd.set(1, Complex64::new(test.fundamental().amplitude(), 0.0));
    test.set_command(&cmd);
    if !visit(test, record, omega, None, schedule, &criteria, PointKind::Jump, clock, observer)? {
        return Ok(None);
    }
    let mut landed = None;
    if let Some(c) = &plan.classifier {
        let p = record.points.last_mut().expect("point was just recorded");
        let b = c.classify(p.response.magnitude(1));
        p.branch = Some(b);
        if b == Branch::Low {
            log::warn!("jump to Ω = {omega} landed on the low branch");
        }
        landed = Some(b);
    }
    let ramp = schedule.ramp_periods * 2.0 * PI / test.plant().structure.omega()[0];
    for &w in &plan.continuation {
        visit(test, record, w, Some(ramp), schedule, &criteria, PointKind::Continuation, clock, observer)?;
    }
    Ok(landed)
}
