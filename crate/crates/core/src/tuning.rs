//! Heuristic tuning of the harmonizer: cutoff selection from the filter
//! fluctuation on an open-loop run, then geometric sweeps of the
//! proportional and integral gains until oscillations of the Fourier
//! coefficients set in, selecting half of each critical value.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::control::{Harmonizer, PiGains};
use crate::error::{invalid, Error, Result};
use crate::estimator::{AdaptiveFilter, CoefficientHistory};
use crate::model::Plant;
use crate::scenario::physical_gains;
use crate::sim::{ControlConfig, PhaseProfile, SimConfig, VirtualTest};

/// Settings of [`detect_oscillation_onset`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OnsetOptions {
    /// Window length in fundamental periods.
    pub window_periods: f64,
    /// Peak-to-peak threshold relative to the target level.
    pub threshold: f64,
    /// Consecutive window-to-window increases required.
    pub growth_windows: usize,
    /// Minimum history after activation, in periods.
    pub min_periods: f64,
}

impl Default for OnsetOptions {
    fn default() -> Self {
        Self { window_periods: 10.0, threshold: 0.05, growth_windows: 2, min_periods: 20.0 }
    }
}

/// Outcome of [`detect_oscillation_onset`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Onset {
    pub fired: bool,
    /// Harmonic whose coefficient triggered the detector.
    pub harmonic: Option<usize>,
    /// Window index at which it fired.
    pub window: Option<usize>,
    /// Largest peak-to-peak of `‖F̃_h‖` over `h ≥ 1`, per window.
    pub peak_to_peak: Vec<f64>,
}

/// Scans a coefficient history recorded after the harmonizer was switched
/// on. Fires when the windowed peak-to-peak of some `‖F̃_h‖` (`h ≥ 1`)
/// exceeds `threshold · level` after growing over `growth_windows`
/// consecutive windows.
pub fn detect_oscillation_onset(
    history: &CoefficientHistory,
    omega: f64,
    level: f64,
    options: &OnsetOptions,
) -> Result<Onset> {
    if !(omega > 0.0 && level > 0.0) {
        return Err(invalid("onset detection needs a positive frequency and level"));
    }
    if !(options.window_periods > 0.0) || options.growth_windows == 0 {
        return Err(invalid("onset windows must be positive"));
    }
    let period = 2.0 * PI / omega;
    let (Some(&t0), Some(&t1)) = (history.times.first(), history.times.last()) else {
        return Err(Error::InsufficientData("empty coefficient history".into()));
    };
    if t1 - t0 < options.min_periods * period * (1.0 - 1e-9) {
        return Err(Error::InsufficientData(format!(
            "onset detection needs {} periods of history, got {:.1}",
            options.min_periods,
            (t1 - t0) / period
        )));
    }
    let order = history.spectra.iter().map(|s| s.order()).min().unwrap_or(0);
    let width = options.window_periods * period;
    let windows = ((t1 - t0) / width * (1.0 + 1e-9)).floor() as usize;
    // p2p[w][h]
    let mut p2p = vec![vec![0.0; order + 1]; windows];
    let mut lo = vec![vec![f64::INFINITY; order + 1]; windows];
    let mut hi = vec![vec![f64::NEG_INFINITY; order + 1]; windows];
    for (t, s) in history.times.iter().zip(&history.spectra) {
        let w = ((t - t0) / width).floor() as usize;
        if w >= windows {
            continue;
        }
        for h in 1..=order {
            let m = s.magnitude(h);
            lo[w][h] = lo[w][h].min(m);
            hi[w][h] = hi[w][h].max(m);
        }
    }
    for w in 0..windows {
        for h in 1..=order {
            if hi[w][h] >= lo[w][h] {
                p2p[w][h] = hi[w][h] - lo[w][h];
            }
        }
    }
    let limit = options.threshold * level;
    let g = options.growth_windows;
    let mut onset = Onset {
        fired: false,
        harmonic: None,
        window: None,
        peak_to_peak: p2p.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).collect(),
    };
    'scan: for w in g..windows {
        for h in 1..=order {
            let growing = (w - g..w).all(|k| p2p[k + 1][h] > p2p[k][h]);
            if growing && p2p[w][h] > limit {
                onset.fired = true;
                onset.harmonic = Some(h);
                onset.window = Some(w);
                break 'scan;
            }
        }
    }
    Ok(onset)
}

/// Settings of [`tune`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TuningOptions {
    /// Distortion tolerance `ε_tol`; the filter fluctuation must stay below
    /// half of it.
    pub tolerance: f64,
    /// Cutoff scan range relative to the first structural mode.
    pub cutoff_min_ratio: f64,
    pub cutoff_max_ratio: f64,
    pub cutoff_points: usize,
    /// Cutoff used when the scan admits the whole range (noise-free data),
    /// relative to the first structural mode. `None` keeps the scan result.
    pub cutoff_fallback_ratio: Option<f64>,
    /// Geometric gain sweeps in normalized units (`k_p G/R`, `k_i G/(R ω_LP)`).
    pub kp_start: f64,
    pub kp_max: f64,
    pub ki_start: f64,
    pub ki_max: f64,
    pub ratio: f64,
    /// Periods to settle the fundamental level before each stage.
    pub settle_periods: usize,
    /// Periods recorded per gain trial.
    pub trial_periods: usize,
    /// Periods recorded for the cutoff scan.
    pub scan_periods: usize,
    /// Coefficient snapshots per period.
    pub snapshots_per_period: usize,
    pub onset: OnsetOptions,
}

impl Default for TuningOptions {
    fn default() -> Self {
        Self {
            tolerance: 0.01,
            cutoff_min_ratio: 0.01,
            cutoff_max_ratio: 1.0,
            cutoff_points: 13,
            cutoff_fallback_ratio: Some(0.1),
            kp_start: 1.0,
            kp_max: 60.0,
            ki_start: 1.0,
            ki_max: 60.0,
            ratio: 1.5,
            settle_periods: 300,
            trial_periods: 300,
            scan_periods: 200,
            snapshots_per_period: 8,
            onset: OnsetOptions::default(),
        }
    }
}

impl TuningOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(invalid("tuning tolerance must be positive"));
        }
        if !(self.cutoff_min_ratio > 0.0 && self.cutoff_max_ratio >= self.cutoff_min_ratio) || self.cutoff_points == 0 {
            return Err(invalid("cutoff scan range must be positive and ordered"));
        }
        if !(self.ratio > 1.0) {
            return Err(invalid("gain sweep ratio must exceed one"));
        }
        if !(self.kp_start > 0.0 && self.kp_max >= self.kp_start && self.ki_start > 0.0 && self.ki_max >= self.ki_start) {
            return Err(invalid("gain sweep bounds must be positive and ordered"));
        }
        if self.snapshots_per_period == 0 || self.scan_periods < 10 {
            return Err(invalid("cutoff scan needs snapshots and at least 10 periods"));
        }
        if (self.trial_periods as f64) < self.onset.min_periods {
            return Err(invalid("gain trials are shorter than the onset detector needs"));
        }
        Ok(())
    }

    fn cutoff_grid(&self, omega1: f64) -> Vec<f64> {
        let n = self.cutoff_points;
        if n == 1 {
            return vec![self.cutoff_max_ratio * omega1];
        }
        let step = (self.cutoff_max_ratio / self.cutoff_min_ratio).ln() / (n - 1) as f64;
        (0..n).map(|k| self.cutoff_min_ratio * (step * k as f64).exp() * omega1).collect()
    }
}

/// One entry of the cutoff scan.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CutoffTrial {
    pub cutoff: f64,
    /// Largest fluctuation over `h ≥ 1`.
    pub fluctuation: f64,
    pub admissible: bool,
}

/// One entry of a gain sweep.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GainTrial {
    /// Normalized gain.
    pub value: f64,
    pub fired: bool,
    pub harmonic: Option<usize>,
    /// Set when the trial ended in a numerical failure, counted as onset.
    pub failure: Option<String>,
}

/// Outcome of [`tune`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TuningReport {
    pub omega: f64,
    pub level: f64,
    pub cutoff_scan: Vec<CutoffTrial>,
    /// Largest admissible cutoff from the scan.
    pub cutoff_selected: f64,
    /// Cutoff used for the gain sweeps and reported gains.
    pub cutoff: f64,
    pub notes: Vec<String>,
    pub kp_sweep: Vec<GainTrial>,
    /// `None` when no onset was found below the sweep bound.
    pub kp_critical: Option<f64>,
    pub kp: f64,
    pub ki_sweep: Vec<GainTrial>,
    pub ki_critical: Option<f64>,
    pub ki: f64,
    /// Physical gains of the selection.
    pub gains: PiGains,
}

/// Level-settled test at the representative point with the harmonizer off.
fn settled_base(
    plant: &Plant,
    control: &ControlConfig,
    sim: &SimConfig,
    omega: f64,
    cutoff: f64,
    periods: usize,
) -> Result<VirtualTest> {
    let mut c = control.clone();
    c.harmonics.clear();
    c.fundamental_enabled = true;
    c.cutoff = cutoff;
    let mut t = VirtualTest::new(plant.clone(), c, sim.clone(), omega)?;
    t.hold(periods.max(1), 1)?;
    Ok(t)
}

fn scan_cutoffs(
    base: &VirtualTest,
    grid: &[f64],
    options: &TuningOptions,
    order: usize,
) -> Result<Vec<CutoffTrial>> {
    let mut test = base.clone();
    let (n_per, dt) = test.hold_sampling();
    let omega = test.omega();
    let mut filters = grid.iter().map(|&c| AdaptiveFilter::new(order, c)).collect::<Result<Vec<_>>>()?;
    let mut histories = vec![CoefficientHistory::default(); grid.len()];
    // Let the slowest filter converge before recording.
    let slowest = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let warm = ((6.0 / slowest) / (2.0 * PI / omega)).ceil() as usize;
    let total = (warm + options.scan_periods) * n_per;
    let record_from = warm * n_per;
    let stride = (n_per / options.snapshots_per_period).max(1);
    test.run_segment(PhaseProfile::Constant(omega), total, dt, |s| {
        let (sn, cs) = s.tau.sin_cos();
        let z = num_complex::Complex64::new(cs, sn);
        for (f, h) in filters.iter_mut().zip(histories.iter_mut()) {
            if s.index >= record_from && (s.index - record_from) % stride == 0 {
                h.push(s.t, f.estimate().clone());
            }
            f.step_with_phasor(s.excitation, z, dt);
        }
    })?;
    let window = options.scan_periods as f64 * 2.0 * PI / omega * (1.0 - 1.0 / options.scan_periods as f64);
    let mut out = Vec::with_capacity(grid.len());
    for (&cutoff, h) in grid.iter().zip(&histories) {
        let fl = h.fluctuation(window, omega)?;
        let worst = fl.iter().skip(1).copied().fold(0.0, f64::max);
        out.push(CutoffTrial { cutoff, fluctuation: worst, admissible: worst < options.tolerance / 2.0 });
    }
    Ok(out)
}

fn gain_trial(
    base: &VirtualTest,
    harmonics: &[usize],
    gains: PiGains,
    value: f64,
    level: f64,
    options: &TuningOptions,
) -> Result<GainTrial> {
    let mut test = base.clone();
    test.set_harmonizer(Harmonizer::new(harmonics.to_vec(), gains)?)?;
    let (n_per, dt) = test.hold_sampling();
    let omega = test.omega();
    let stride = (n_per / options.snapshots_per_period).max(1);
    let mut history = CoefficientHistory::default();
    let run = test.run_segment(PhaseProfile::Constant(omega), options.trial_periods * n_per, dt, |s| {
        if s.index % stride == 0 {
            history.push(s.t, s.estimate.clone());
        }
    });
    if let Err(e) = run {
        return Ok(GainTrial { value, fired: true, harmonic: None, failure: Some(format!("{e}")) });
    }
    let onset = detect_oscillation_onset(&history, omega, level, &options.onset)?;
    Ok(GainTrial { value, fired: onset.fired, harmonic: onset.harmonic, failure: None })
}

fn sweep<F>(start: f64, max: f64, ratio: f64, mut trial: F) -> Result<(Vec<GainTrial>, Option<f64>)>
where
    F: FnMut(f64) -> Result<GainTrial>,
{
    let mut out = Vec::new();
    let mut v = start;
    while v <= max * (1.0 + 1e-12) {
        let t = trial(v)?;
        let fired = t.fired;
        out.push(t);
        if fired {
            return Ok((out, Some(v)));
        }
        v *= ratio;
    }
    Ok((out, None))
}

/// Runs the tuning procedure at `omega` and the level of `control.target`.
/// The fundamental controller stays active throughout. Harmonics to control
/// are taken from `control.harmonics`, or `2..=order` when empty.
pub fn tune(
    plant: &Plant,
    control: &ControlConfig,
    sim: &SimConfig,
    omega: f64,
    options: &TuningOptions,
) -> Result<TuningReport> {
    options.validate()?;
    control.validate()?;
    sim.validate()?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(invalid("representative frequency must be positive"));
    }
    let omega1 = plant.structure.omega()[0];
    let level = control.target;
    let harmonics: Vec<usize> =
        if control.harmonics.is_empty() { (2..=control.order).collect() } else { control.harmonics.clone() };
    let mut notes = Vec::new();

    // Cutoff scan on an open-loop (harmonizer off) run.
    let base = settled_base(plant, control, sim, omega, control.cutoff, options.settle_periods)?;
    let grid = options.cutoff_grid(omega1);
    let cutoff_scan = scan_cutoffs(&base, &grid, options, control.order)?;
    let Some(selected) = cutoff_scan.iter().rev().find(|c| c.admissible).map(|c| c.cutoff) else {
        return Err(Error::NoConvergence(
            "no admissible filter cutoff: fluctuations exceed half the tolerance, improve signal-to-noise ratio".into(),
        ));
    };
    let top = grid[grid.len() - 1];
    let mut cutoff = selected;
    if selected >= top * (1.0 - 1e-12) {
        if let Some(r) = options.cutoff_fallback_ratio {
            cutoff = r * omega1;
            notes.push(format!(
                "cutoff scan admitted the whole range; using the fallback ω_LP = {r} ω_1 = {cutoff:.4} rad/s"
            ));
        }
    }

    let base = if cutoff == control.cutoff {
        base
    } else {
        settled_base(plant, control, sim, omega, cutoff, options.settle_periods)?
    };
    let exciter = &plant.exciter;
    let (kp_sweep, kp_critical) = sweep(options.kp_start, options.kp_max, options.ratio, |v| {
        gain_trial(&base, &harmonics, physical_gains(exciter, cutoff, v, 0.0), v, level, options)
    })?;
    let kp = match kp_critical {
        Some(c) => c / 2.0,
        None => {
            notes.push(format!("no k_p onset up to {}; selecting half the bound", options.kp_max));
            options.kp_max / 2.0
        }
    };
    let (ki_sweep, ki_critical) = sweep(options.ki_start, options.ki_max, options.ratio, |v| {
        gain_trial(&base, &harmonics, physical_gains(exciter, cutoff, kp, v), v, level, options)
    })?;
    let ki = match ki_critical {
        Some(c) => c / 2.0,
        None => {
            notes.push(format!("no k_i onset up to {}; selecting half the bound", options.ki_max));
            options.ki_max / 2.0
        }
    };
    let gains = physical_gains(exciter, cutoff, kp, ki);
    Ok(TuningReport {
        omega,
        level,
        cutoff_scan,
        cutoff_selected: selected,
        cutoff,
        notes,
        kp_sweep,
        kp_critical,
        kp,
        ki_sweep,
        ki_critical,
        ki,
        gains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::HarmonicSpectrum;
    use num_complex::Complex64;

    fn history(omega: f64, periods: f64, amp: impl Fn(f64) -> f64) -> CoefficientHistory {
        let mut h = CoefficientHistory::default();
        let per = 2.0 * PI / omega;
        let n = (periods * 8.0) as usize;
        for k in 0..=n {
            let t = k as f64 * per / 8.0;
            let mut s = HarmonicSpectrum::zeros(3);
            s.set(1, Complex64::new(2.0, 0.0));
            s.set(3, Complex64::new(amp(t), 0.0));
            h.push(t, s);
        }
        h
    }

    #[test]
    fn settling_coefficients_do_not_fire() {
        let h = history(50.0, 100.0, |t| 0.5 + 0.4 * (-3.0 * t).exp() * (20.0 * t).cos());
        let o = detect_oscillation_onset(&h, 50.0, 2.0, &OnsetOptions::default()).unwrap();
        assert!(!o.fired);
    }

    #[test]
    fn growing_oscillation_fires() {
        let h = history(50.0, 100.0, |t| 0.5 + 1e-3 * (2.0 * t).exp() * (20.0 * t).cos());
        let o = detect_oscillation_onset(&h, 50.0, 2.0, &OnsetOptions::default()).unwrap();
        assert!(o.fired);
        assert_eq!(o.harmonic, Some(3));
    }

    #[test]
    fn short_history_is_rejected() {
        let h = history(50.0, 10.0, |_| 0.5);
        assert!(matches!(
            detect_oscillation_onset(&h, 50.0, 2.0, &OnsetOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn cutoff_grid_spans_range() {
        let o = TuningOptions::default();
        let g = o.cutoff_grid(10.0);
        assert_eq!(g.len(), 13);
        assert!((g[0] - 0.1).abs() < 1e-12 && (g[12] - 10.0).abs() < 1e-9);
    }
}
