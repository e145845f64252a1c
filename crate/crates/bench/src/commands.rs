//! The bench operations: each computes in memory and has a companion that
//! writes its artifacts to an output directory.

use std::path::Path;
use std::time::Instant;

use harmonize_core::analysis::{check_truncation_order, drive_point_report, mass_ratio, DrivePointReport, TruncationCheck};
use harmonize_core::baseline::{stepped_sine_iterative, IterativeRun};
use harmonize_core::model::ExcitationCoupling;
use harmonize_core::reference::{capture_isola, trace_branch, Branch, IsolaCapture, IsolaSeed};
use harmonize_core::sim::{run_observed, BranchClassifier, Clock, PointKind, RunRecord, VirtualTest};
use harmonize_core::tuning::{tune, TuningReport};
use serde::{Deserialize, Serialize};

use crate::artifacts::{ArtifactDir, Manifest};
use crate::error::{validation, BenchError, Result};
use crate::grid::{expand, format_grid, GridSegment};
use crate::io::{encode_columns, read_json, sci, to_json, Table};
use crate::metrics::{distortion_count, find_jump, max_distortion, mean_iterations, upper_fold, DistortionCount, Jump, ReferenceSet};
use crate::scenario::Scenario;
use crate::schedule::ScheduleFile;
use crate::tables::{
    branch_table, margin_table, points_table, timing_table, PointRow, BRANCH_SCHEMA, DUMP_SCHEMA, MARGIN_SCHEMA,
    parse_points, POINTS_SCHEMA, TIMING_SCHEMA, TUNING_SCHEMA, COMPARISON_SCHEMA,
};

/// Distortion limit used in run summaries, fraction of the target.
pub const HARMONIZED_LIMIT: f64 = 1e-4;

/// Monotonic wall clock for per-point durations.
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

// ---------------------------------------------------------------- simulate

/// Time series kept from the end of every hold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Series {
    pub sweep: Vec<f64>,
    pub point: Vec<f64>,
    pub omega: Vec<f64>,
    pub time: Vec<f64>,
    pub voltage: Vec<f64>,
    pub excitation: Vec<f64>,
    pub response: Vec<f64>,
}

impl Series {
    fn extend(&mut self, other: Series) {
        self.sweep.extend(other.sweep);
        self.point.extend(other.point);
        self.omega.extend(other.omega);
        self.time.extend(other.time);
        self.voltage.extend(other.voltage);
        self.excitation.extend(other.excitation);
        self.response.extend(other.response);
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        encode_columns(&[
            ("sweep_index", &self.sweep),
            ("point_index", &self.point),
            ("omega_rad_s", &self.omega),
            ("time_s", &self.time),
            ("voltage_v", &self.voltage),
            ("excitation", &self.excitation),
            ("response_m", &self.response),
        ])
    }
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub name: String,
    pub record: RunRecord,
}

/// Runs every sweep of the schedule (in parallel, each from rest) with the
/// scenario's controller. With `dump_periods`, the last periods of every
/// hold are kept.
pub fn simulate(scn: &Scenario, sched: &ScheduleFile, dump_periods: Option<usize>) -> Result<(Vec<SweepRun>, Option<Series>)> {
    let plant = scn.plant()?;
    let control = scn.control()?;
    let sim = scn.sim_config();
    let w1 = scn.omega1();
    let schedules = sched.sweeps.iter().map(|s| s.schedule(w1)).collect::<Result<Vec<_>>>()?;
    let results: Vec<Result<(RunRecord, Series)>> = std::thread::scope(|s| {
        let handles: Vec<_> = schedules
            .iter()
            .enumerate()
            .map(|(k, schedule)| {
                let (plant, control, sim) = (plant.clone(), control.clone(), sim.clone());
                s.spawn(move || -> Result<(RunRecord, Series)> {
                    let mut test = VirtualTest::new(plant, control, sim, schedule.frequencies[0])?;
                    let mut series = Series::default();
                    let mut index = 0usize;
                    let clock = WallClock::new();
                    let record = run_observed(&mut test, schedule, &clock, &mut |p, data| {
                        if let Some(periods) = dump_periods {
                            let n = (periods * data.samples_per_period).min(data.time.len());
                            let from = data.time.len() - n;
                            series.sweep.extend(std::iter::repeat_n(k as f64, n));
                            series.point.extend(std::iter::repeat_n(index as f64, n));
                            series.omega.extend(std::iter::repeat_n(p.omega, n));
                            series.time.extend_from_slice(&data.time[from..]);
                            series.voltage.extend_from_slice(&data.voltage[from..]);
                            series.excitation.extend_from_slice(&data.excitation[from..]);
                            series.response.extend_from_slice(&data.response[from..]);
                        }
                        index += 1;
                    })?;
                    Ok((record, series))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep thread panicked")).collect()
    });
    let mut runs = Vec::new();
    let mut all = Series::default();
    for (sweep, r) in sched.sweeps.iter().zip(results) {
        let (record, series) = r?;
        all.extend(series);
        runs.push(SweepRun { name: sweep.name.clone(), record });
    }
    Ok((runs, dump_periods.map(|_| all)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureSummary {
    pub omega_rad_s: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub name: String,
    pub points: usize,
    pub failures: Vec<FailureSummary>,
    /// `max ‖F_h‖/F̂` over the sweep, for `h = 2..=H`.
    pub max_distortion: Vec<(usize, f64)>,
    pub below_limit: DistortionCount,
    pub non_periodic: usize,
    pub unsettled: usize,
    pub jump: Option<Jump>,
    pub settles: u32,
    pub mean_iterations: Option<f64>,
}

pub fn summarize(name: &str, rows: &[PointRow], failures: Vec<FailureSummary>, scn: &Scenario) -> SweepSummary {
    let level = scn.control.target_level_n_or_m_s2;
    let order = scn.control.filter_order;
    let harmonics: Vec<usize> = (2..=order).collect();
    let main: Vec<PointRow> = rows.iter().filter(|r| r.kind == "main" || r.kind == "iterative").cloned().collect();
    SweepSummary {
        name: name.into(),
        points: rows.len(),
        failures,
        max_distortion: harmonics.iter().map(|&h| (h, max_distortion(rows, h, level))).collect(),
        below_limit: distortion_count(rows, &harmonics, level, HARMONIZED_LIMIT),
        non_periodic: rows.iter().filter(|r| r.periodic == Some(false)).count(),
        unsettled: rows.iter().filter(|r| !r.settled).count(),
        jump: find_jump(&main),
        settles: rows.iter().map(|r| r.settles).sum(),
        mean_iterations: mean_iterations(rows),
    }
}

/// State handed from a jump point to the reference solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolaSeedFile {
    pub sweep: String,
    pub seed: IsolaSeed,
    pub classifier: Option<BranchClassifier>,
}

fn common_configs(out: &mut ArtifactDir, scn: &Scenario) -> Result<()> {
    out.config("scenario", &scn.name, "scenario.toml", &scn.to_toml())?;
    out.seed("noise", scn.seed);
    Ok(())
}

pub fn write_simulation(
    dir: &Path,
    scn: &Scenario,
    sched: &ScheduleFile,
    runs: &[SweepRun],
    series: Option<&Series>,
) -> Result<Manifest> {
    let mut out = ArtifactDir::new(dir, "simulate");
    common_configs(&mut out, scn)?;
    out.config("schedule", "schedule", "schedule.toml", &sched.to_toml())?;
    let mut rows = Vec::new();
    let mut timing = Vec::new();
    let mut summaries = Vec::new();
    for run in runs {
        let r: Vec<PointRow> = run.record.points.iter().map(|p| PointRow::from_sim(&run.name, p)).collect();
        timing.extend(run.record.points.iter().map(|p| (run.name.clone(), p.omega, p.wall_time)));
        let failures: Vec<FailureSummary> = run
            .record
            .failures
            .iter()
            .map(|f| FailureSummary { omega_rad_s: f.omega, message: f.message.clone() })
            .collect();
        if !failures.is_empty() {
            out.mark_failed();
        }
        summaries.push(summarize(&run.name, &r, failures, scn));
        rows.extend(r);
        if let Some(j) = run.record.of_kind(PointKind::Jump).next() {
            let classifier = sched
                .sweeps
                .iter()
                .find(|s| s.name == run.name)
                .and_then(|s| s.schedule(scn.omega1()).ok())
                .and_then(|s| s.jump)
                .and_then(|j| j.classifier);
            let seed = IsolaSeedFile {
                sweep: run.name.clone(),
                seed: IsolaSeed { omega: j.omega, phase: j.forcing_phase(), state: j.end_state.clone() },
                classifier,
            };
            out.write(&format!("isola_seed_{}.json", run.name), &to_json(&seed), None)?;
        }
    }
    let order = scn.control.filter_order;
    out.write("points.csv", &points_table(&rows, order, scn.omega1()).to_csv(), Some(POINTS_SCHEMA))?;
    out.write_volatile("timing.csv", &timing_table(&timing).to_csv(), Some(TIMING_SCHEMA))?;
    out.write("summary.json", &to_json(&summaries), None)?;
    if let Some(s) = series {
        out.write("series.bin", &s.encode()?, Some(DUMP_SCHEMA))?;
    }
    let check = check_truncation_order(order, scn.simulation.sample_rate_hz, max_omega(sched, scn.omega1()));
    if check != TruncationCheck::Ok {
        out.note(format!("filter order {order} versus sample rate: {check:?}"));
    }
    out.finish()
}

fn max_omega(sched: &ScheduleFile, w1: f64) -> f64 {
    sched
        .sweeps
        .iter()
        .filter_map(|s| s.schedule(w1).ok())
        .flat_map(|s| {
            let extra: Vec<f64> = s.jump.iter().flat_map(|j| j.continuation.clone()).collect();
            s.frequencies.into_iter().chain(extra)
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------- iterate

/// Iterative-baseline sweeps (parallel, each from rest). Jumps in the
/// schedule are not used by the baseline.
pub fn iterate(scn: &Scenario, sched: &ScheduleFile) -> Result<Vec<(String, IterativeRun)>> {
    let plant = scn.plant()?;
    let control = scn.control()?;
    let sim = scn.sim_config();
    let options = scn.iterative_options();
    let schedules = sched
        .sweeps
        .iter()
        .map(|s| {
            let mut c = s.schedule(scn.omega1())?;
            c.jump = None;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<Result<IterativeRun>> = std::thread::scope(|s| {
        let handles: Vec<_> = schedules
            .iter()
            .map(|schedule| {
                let (plant, control, sim) = (&plant, &control, &sim);
                s.spawn(move || {
                    Ok(stepped_sine_iterative(plant, control, sim, schedule, &options, &WallClock::new())?)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep thread panicked")).collect()
    });
    sched.sweeps.iter().zip(results).map(|(s, r)| Ok((s.name.clone(), r?))).collect()
}

pub fn write_iterative(dir: &Path, scn: &Scenario, sched: &ScheduleFile, runs: &[(String, IterativeRun)]) -> Result<Manifest> {
    let mut out = ArtifactDir::new(dir, "iterate");
    common_configs(&mut out, scn)?;
    out.config("schedule", "schedule", "schedule.toml", &sched.to_toml())?;
    if sched.sweeps.iter().any(|s| s.jump.is_some()) {
        out.note("jump sections are not used by the iterative baseline");
    }
    let mut rows = Vec::new();
    let mut timing = Vec::new();
    let mut summaries = Vec::new();
    for (name, run) in runs {
        let r: Vec<PointRow> = run.points.iter().map(|p| PointRow::from_iterative(name, p)).collect();
        timing.extend(run.points.iter().map(|p| (name.clone(), p.omega, p.wall_time)));
        let failures: Vec<FailureSummary> =
            run.failures.iter().map(|f| FailureSummary { omega_rad_s: f.omega, message: f.message.clone() }).collect();
        if !failures.is_empty() {
            out.mark_failed();
        }
        summaries.push(summarize(name, &r, failures, scn));
        rows.extend(r);
    }
    out.write("points.csv", &points_table(&rows, scn.control.filter_order, scn.omega1()).to_csv(), Some(POINTS_SCHEMA))?;
    out.write_volatile("timing.csv", &timing_table(&timing).to_csv(), Some(TIMING_SCHEMA))?;
    out.write("summary.json", &to_json(&summaries), None)?;
    out.finish()
}

// ---------------------------------------------------------------- reference

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBranch {
    pub name: String,
    pub branch: Branch,
}

/// Main branch traced over the grid window from the linear response at the
/// first grid point; with a seed, the isolated branch captured from it. A
/// seed that converges to a low-branch orbit is reported as a one-point
/// branch named `seed-rejected`.
pub fn reference(scn: &Scenario, grid: &[GridSegment], seed: Option<&IsolaSeedFile>) -> Result<Vec<NamedBranch>> {
    let model = scn.reference_model()?;
    let w1 = scn.omega1();
    let ratios = expand(grid)?;
    let (lo, hi) = (ratios.iter().copied().fold(f64::INFINITY, f64::min), ratios.iter().copied().fold(0.0, f64::max));
    let mut opts = scn.arclength_options();
    opts.omega_min = lo * w1;
    opts.omega_max = hi * w1;
    let direction = if ratios.len() > 1 && ratios[1] < ratios[0] { -1.0 } else { 1.0 };
    let start = model.shoot_from_linear(ratios[0] * w1)?;
    let main = trace_branch(&model, &start, direction, &opts)?;
    let mut out = vec![NamedBranch { name: "main".into(), branch: main }];
    if let Some(s) = seed {
        let classifier = s.classifier.ok_or_else(|| validation("isola seed file has no branch classifier"))?;
        let mut iso = scn.arclength_options();
        iso.omega_min = iso.omega_min.min(opts.omega_min);
        iso.omega_max = iso.omega_max.max(opts.omega_max);
        match capture_isola(&model, &s.seed, &classifier, &iso)? {
            IsolaCapture::Isola(b) => out.push(NamedBranch { name: "isola".into(), branch: b }),
            IsolaCapture::Rejected(p) => out.push(NamedBranch {
                name: "seed-rejected".into(),
                branch: Branch { points: vec![p], complete: false, closed: false, diagnostic: Some("seed on low branch".into()) },
            }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct BranchSummary {
    name: String,
    points: usize,
    complete: bool,
    closed: bool,
    diagnostic: Option<String>,
    turning_points_omega_ratio: Vec<f64>,
    stable_points: usize,
    torus_points: usize,
    omega_ratio_range: (f64, f64),
    max_h1_m: f64,
}

pub fn write_reference(dir: &Path, scn: &Scenario, grid: &[GridSegment], branches: &[NamedBranch]) -> Result<Manifest> {
    let mut out = ArtifactDir::new(dir, "reference");
    common_configs(&mut out, scn)?;
    out.config("grid", &format_grid(grid), "grid.txt", &format_grid(grid))?;
    let w1 = scn.omega1();
    let pairs: Vec<(String, Branch)> = branches.iter().map(|b| (b.name.clone(), b.branch.clone())).collect();
    out.write("branch.csv", &branch_table(&pairs, w1).to_csv(), Some(BRANCH_SCHEMA))?;
    out.write("branches.json", &to_json(&branches), None)?;
    let summary: Vec<BranchSummary> = branches
        .iter()
        .map(|b| {
            let p = &b.branch.points;
            BranchSummary {
                name: b.name.clone(),
                points: p.len(),
                complete: b.branch.complete,
                closed: b.branch.closed,
                diagnostic: b.branch.diagnostic.clone(),
                turning_points_omega_ratio: b.branch.turning_points().iter().map(|w| w / w1).collect(),
                stable_points: p.iter().filter(|q| q.is_stable()).count(),
                torus_points: p.iter().filter(|q| q.torus).count(),
                omega_ratio_range: (
                    p.iter().map(|q| q.omega).fold(f64::INFINITY, f64::min) / w1,
                    p.iter().map(|q| q.omega).fold(0.0, f64::max) / w1,
                ),
                max_h1_m: b.branch.max_amplitude(1),
            }
        })
        .collect();
    if branches.iter().any(|b| b.name == "seed-rejected") {
        out.note("isola seed converged to a low-branch orbit; no isolated branch captured");
    }
    out.write("summary.json", &to_json(&summary), None)?;
    out.finish()
}

/// Re-solvable reference from a `reference` output directory.
pub fn load_reference(dir: &Path) -> Result<ReferenceSet> {
    let scn = Scenario::load(&dir.join("scenario.toml"))?;
    let branches: Vec<NamedBranch> = read_json(&dir.join("branches.json"))?;
    Ok(ReferenceSet {
        model: scn.reference_model()?,
        branches: branches.into_iter().filter(|b| b.name != "seed-rejected").map(|b| (b.name, b.branch)).collect(),
    })
}

pub fn load_seed(path: &Path) -> Result<IsolaSeedFile> {
    read_json(path)
}

// ---------------------------------------------------------------- stability

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriveVerdict {
    pub location: String,
    pub mass_ratios: Vec<f64>,
    pub admissible: bool,
    pub negative_crossings_omega_ratio: Vec<f64>,
    pub positive_crossings_omega_ratio: Vec<f64>,
    pub min_real_part: f64,
    pub max_real_part: f64,
}

pub fn stability(scn: &Scenario, drives: &[String], grid: &[GridSegment]) -> Result<(DrivePointReport, Vec<DriveVerdict>)> {
    let plant = scn.plant()?;
    if matches!(plant.coupling, ExcitationCoupling::Base { .. }) {
        return Err(validation("drive-point screening applies to force drive"));
    }
    let w1 = scn.omega1();
    let grid: Vec<f64> = expand(grid)?.iter().map(|r| r * w1).collect();
    let g = plant.exciter.voltage_gain();
    let kp = scn.control.kp_normalized / g;
    let names: Vec<&str> = drives.iter().map(String::as_str).collect();
    let report = drive_point_report(&plant.structure, &plant.exciter, &names, &grid, &[kp])?;
    let verdicts = report
        .candidates
        .iter()
        .map(|c| {
            let coupling = ExcitationCoupling::Force { drive_shape: plant.structure.shape(&c.location)?.to_vec() };
            let s = &c.scans[0];
            Ok(DriveVerdict {
                location: c.location.clone(),
                mass_ratios: (0..plant.modes()).map(|l| mass_ratio(&plant.exciter, &coupling, l)).collect(),
                admissible: c.admissible,
                negative_crossings_omega_ratio: s.negative_crossings().iter().map(|w| w / w1).collect(),
                positive_crossings_omega_ratio: s.positive_crossings().iter().map(|w| w / w1).collect(),
                min_real_part: s.min(),
                max_real_part: s.max(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((report, verdicts))
}

pub fn write_stability(
    dir: &Path,
    scn: &Scenario,
    grid: &[GridSegment],
    report: &DrivePointReport,
    verdicts: &[DriveVerdict],
) -> Result<Manifest> {
    let mut out = ArtifactDir::new(dir, "stability");
    common_configs(&mut out, scn)?;
    out.config("grid", &format_grid(grid), "grid.txt", &format_grid(grid))?;
    let g = scn.exciter().voltage_gain();
    out.write("margin.csv", &margin_table(report, scn.omega1(), g).to_csv(), Some(MARGIN_SCHEMA))?;
    out.write("verdicts.json", &to_json(&verdicts), None)?;
    out.finish()
}

// ---------------------------------------------------------------- tune

pub fn run_tuning(scn: &Scenario) -> Result<TuningReport> {
    let plant = scn.plant()?;
    let control = scn.control()?;
    let omega = scn.tuning.omega_ratio * scn.omega1();
    Ok(tune(&plant, &control, &scn.sim_config(), omega, &scn.tuning_options())?)
}

/// Scenario with the tuned cutoff and gains.
pub fn tuned_scenario(scn: &Scenario, report: &TuningReport) -> Scenario {
    scn.with_tuned(report.cutoff, report.kp, report.ki)
}

pub fn write_tuning(dir: &Path, scn: &Scenario, report: &TuningReport) -> Result<Manifest> {
    let mut out = ArtifactDir::new(dir, "tune");
    common_configs(&mut out, scn)?;
    let cols = ["stage", "value", "admissible", "fluctuation", "fired", "harmonic", "failure"];
    let mut t = Table::new(cols.iter().map(|s| s.to_string()).collect());
    for c in &report.cutoff_scan {
        t.push(vec![
            "cutoff_rad_s".into(),
            sci(c.cutoff),
            c.admissible.to_string(),
            sci(c.fluctuation),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    for (stage, sweep) in [("kp_normalized", &report.kp_sweep), ("ki_normalized", &report.ki_sweep)] {
        for g in sweep {
            t.push(vec![
                stage.into(),
                sci(g.value),
                String::new(),
                String::new(),
                g.fired.to_string(),
                g.harmonic.map_or_else(String::new, |h| h.to_string()),
                g.failure.clone().unwrap_or_default(),
            ]);
        }
    }
    out.write("tuning_sweeps.csv", &t.to_csv(), Some(TUNING_SCHEMA))?;
    out.write("tuning.json", &to_json(report), None)?;
    out.write("tuned_scenario.toml", tuned_scenario(scn, report).to_toml().as_bytes(), None)?;
    for n in &report.notes {
        out.note(n.clone());
    }
    out.finish()
}

// ---------------------------------------------------------------- compare

pub fn load_points(dir: &Path) -> Result<Vec<PointRow>> {
    parse_points(&Table::read_csv(&dir.join("points.csv"))?)
}

/// One harmonized point next to its reference orbit and iterative twin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub sweep: String,
    pub omega: f64,
    pub periodic: Option<bool>,
    pub h1: f64,
    pub h3: f64,
    pub settles: u32,
    pub reference: Option<crate::metrics::ReferenceMatch>,
    pub iterative_h1: Option<f64>,
    /// `max_h ‖F_h − F_h'‖ / level` against the twin point.
    pub excitation_delta: Option<f64>,
    pub iterative_settles: Option<u32>,
    pub iterative_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSummary {
    pub points: usize,
    pub matched: usize,
    /// Points without a stable reference orbit or flagged non-periodic.
    pub unmatched: usize,
    pub worst_reference_error: Option<f64>,
    pub max_excitation_delta: Option<f64>,
    pub mean_settles: f64,
    pub iterative_mean_settles: Option<f64>,
    pub iterative_mean_iterations: Option<f64>,
}

fn same_omega(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Pairs harmonized points with stable reference orbits at the same
/// frequency (re-solved exactly there) and with iterative points, matched by
/// sweep name and frequency, else by frequency alone. Points flagged
/// non-periodic are not matched against the reference.
pub fn compare(
    harmonized: &[PointRow],
    iterative: Option<&[PointRow]>,
    reference: Option<&ReferenceSet>,
    level: f64,
) -> Vec<ComparisonRow> {
    let matches: Vec<Option<crate::metrics::ReferenceMatch>> = match reference {
        None => vec![None; harmonized.len()],
        Some(set) => {
            let threads = std::thread::available_parallelism().map_or(4, |n| n.get());
            let chunk = harmonized.len().div_ceil(threads).max(1);
            std::thread::scope(|s| {
                let handles: Vec<_> = harmonized
                    .chunks(chunk)
                    .map(|rows| {
                        s.spawn(move || {
                            rows.iter()
                                .map(|r| {
                                    (r.periodic != Some(false))
                                        .then(|| set.match_stable(r.omega, r.response.magnitude(1), r.response.magnitude(3)))
                                        .flatten()
                                })
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                handles.into_iter().flat_map(|h| h.join().expect("comparison thread panicked")).collect()
            })
        }
    };
    harmonized
        .iter()
        .zip(matches)
        .map(|(r, m)| {
            let twin = iterative.and_then(|it| {
                it.iter()
                    .find(|p| p.sweep == r.sweep && same_omega(p.omega, r.omega))
                    .or_else(|| it.iter().find(|p| same_omega(p.omega, r.omega)))
            });
            ComparisonRow {
                sweep: r.sweep.clone(),
                omega: r.omega,
                periodic: r.periodic,
                h1: r.response.magnitude(1),
                h3: r.response.magnitude(3),
                settles: r.settles,
                reference: m,
                iterative_h1: twin.map(|p| p.response.magnitude(1)),
                excitation_delta: twin.map(|p| {
                    let n = r.excitation.order().min(p.excitation.order());
                    (0..=n).map(|h| (r.excitation.get(h) - p.excitation.get(h)).norm() / level).fold(0.0, f64::max)
                }),
                iterative_settles: twin.map(|p| p.settles),
                iterative_iterations: twin.and_then(|p| p.iterations),
            }
        })
        .collect()
}

pub fn comparison_summary(rows: &[ComparisonRow]) -> ComparisonSummary {
    let n = rows.len().max(1) as f64;
    let twins: Vec<&ComparisonRow> = rows.iter().filter(|r| r.iterative_h1.is_some()).collect();
    let its: Vec<usize> = rows.iter().filter_map(|r| r.iterative_iterations).collect();
    ComparisonSummary {
        points: rows.len(),
        matched: rows.iter().filter(|r| r.reference.is_some()).count(),
        unmatched: rows.iter().filter(|r| r.reference.is_none()).count(),
        worst_reference_error: rows.iter().filter_map(|r| r.reference.as_ref().map(|m| m.worst())).reduce(f64::max),
        max_excitation_delta: rows.iter().filter_map(|r| r.excitation_delta).reduce(f64::max),
        mean_settles: rows.iter().map(|r| r.settles as f64).sum::<f64>() / n,
        iterative_mean_settles: (!twins.is_empty())
            .then(|| twins.iter().filter_map(|r| r.iterative_settles).map(f64::from).sum::<f64>() / twins.len() as f64),
        iterative_mean_iterations: (!its.is_empty()).then(|| its.iter().sum::<usize>() as f64 / its.len() as f64),
    }
}

fn comparison_table(rows: &[ComparisonRow], omega1: f64) -> Table {
    let cols = [
        "sweep", "omega_rad_s", "omega_ratio", "periodic", "h1_m", "h3_m", "settles", "reference_branch",
        "reference_h1_m", "reference_h3_m", "error_h1", "error_h3", "iterative_h1_m", "excitation_delta", "iterative_settles",
        "iterative_iterations",
    ];
    let mut t = Table::new(cols.iter().map(|c| c.to_string()).collect());
    let opt = |x: Option<f64>| x.map_or_else(String::new, sci);
    for r in rows {
        let m = r.reference.as_ref();
        t.push(vec![
            r.sweep.clone(),
            sci(r.omega),
            sci(r.omega / omega1),
            r.periodic.map_or_else(String::new, |p| p.to_string()),
            sci(r.h1),
            sci(r.h3),
            r.settles.to_string(),
            m.map_or_else(String::new, |m| m.branch.clone()),
            opt(m.map(|m| m.reference_h1)),
            opt(m.map(|m| m.reference_h3)),
            opt(m.map(|m| m.error_h1)),
            opt(m.map(|m| m.error_h3)),
            opt(r.iterative_h1),
            opt(r.excitation_delta),
            r.iterative_settles.map_or_else(String::new, |s| s.to_string()),
            r.iterative_iterations.map_or_else(String::new, |s| s.to_string()),
        ]);
    }
    t
}

/// Total per-point wall time of a run directory, when it has a timing file.
pub fn run_wall_time(dir: &Path) -> Option<f64> {
    let t = Table::read_csv(&dir.join("timing.csv")).ok()?;
    let c = t.column("wall_time_s").ok()?;
    (0..t.rows.len()).map(|i| t.f64_at(i, c).ok()).sum()
}

pub fn write_comparison(dir: &Path, scn: &Scenario, rows: &[ComparisonRow], wall_times: &[(String, Option<f64>)]) -> Result<Manifest> {
    let mut out = ArtifactDir::new(dir, "compare");
    common_configs(&mut out, scn)?;
    out.write("comparison.csv", &comparison_table(rows, scn.omega1()).to_csv(), Some(COMPARISON_SCHEMA))?;
    out.write("comparison.json", &to_json(&comparison_summary(rows)), None)?;
    let times: Vec<_> = wall_times.iter().map(|(run, t)| serde_json::json!({ "run": run, "wall_time_s": t })).collect();
    out.write_volatile("timing.json", &to_json(&times), None)?;
    out.finish()
}

// ---------------------------------------------------------------- errors

/// Maps run-level point failures to an error after artifacts are written.
pub fn check_status(manifest: &Manifest) -> Result<()> {
    if manifest.status == "ok" {
        Ok(())
    } else {
        Err(BenchError::Numerical(format!("{} reported failed points; see summary.json", manifest.command)))
    }
}

/// Upper fold of the `main` reference branch, rad/s.
pub fn main_fold(branches: &[NamedBranch]) -> Option<f64> {
    branches.iter().find(|b| b.name == "main").and_then(|b| upper_fold(&b.branch))
}
