//! Branch continuation of periodic orbits: sequential stepping over a
//! frequency grid, pseudo-arclength tracing through turning points, and
//! isola capture from a state handed off by the virtual test.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::model::Plant;
use crate::reference::newmark::Forcing;
use crate::reference::shooting::{
    finish_point, linear_guess, periodicity, shoot, BranchPoint, ShootingOptions, ShootingProblem,
};
use crate::sim::stepped::{Branch as BranchSide, BranchClassifier};

/// Plant, forcing level and solver settings shared along a branch.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel {
    pub plant: Plant,
    pub level: f64,
    pub observation: String,
    pub options: ShootingOptions,
}

impl ReferenceModel {
    pub fn new(plant: Plant, level: f64, observation: impl Into<String>) -> Self {
        Self { plant, level, observation: observation.into(), options: ShootingOptions::default() }
    }

    pub fn forcing(&self, omega: f64, phase: f64) -> Forcing {
        Forcing { amplitude: self.level, omega, phase }
    }

    pub fn problem(&self, omega: f64, phase: f64, guess: Vec<f64>) -> ShootingProblem {
        ShootingProblem {
            plant: self.plant.clone(),
            forcing: self.forcing(omega, phase),
            guess,
            observation: self.observation.clone(),
            options: self.options,
        }
    }

    /// Shoots from the linear response as initial guess.
    pub fn shoot_from_linear(&self, omega: f64) -> Result<BranchPoint> {
        let f = self.forcing(omega, 0.0);
        shoot(&self.problem(omega, 0.0, linear_guess(&self.plant, &f)?))
    }
}

/// Ordered set of branch points.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    /// The requested range was covered (or the loop closed).
    pub complete: bool,
    pub closed: bool,
    pub diagnostic: Option<String>,
}

/// Response magnitudes interpolated at one frequency on one branch segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample {
    pub omega: f64,
    pub h1: f64,
    pub h3: f64,
    pub stable: bool,
}

impl Branch {
    /// Frequencies at which `Ω` reverses along the branch.
    pub fn turning_points(&self) -> Vec<f64> {
        let p = &self.points;
        let mut out = Vec::new();
        for i in 1..p.len().saturating_sub(1) {
            let a = p[i].omega - p[i - 1].omega;
            let b = p[i + 1].omega - p[i].omega;
            if a * b < 0.0 {
                out.push(p[i].omega);
            }
        }
        out
    }

    /// Every segment crossing `omega`, linearly interpolated. A segment is
    /// stable when both ends are.
    pub fn samples_at(&self, omega: f64) -> Vec<ReferenceSample> {
        let mut out = Vec::new();
        for pair in self.points.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let (lo, hi) = if a.omega <= b.omega { (a.omega, b.omega) } else { (b.omega, a.omega) };
            if omega < lo || omega > hi || hi == lo {
                continue;
            }
            let s = (omega - a.omega) / (b.omega - a.omega);
            let lerp = |x: f64, y: f64| x + s * (y - x);
            out.push(ReferenceSample {
                omega,
                h1: lerp(a.amplitude(1), b.amplitude(1)),
                h3: lerp(a.amplitude(3), b.amplitude(3)),
                stable: a.is_stable() && b.is_stable(),
            });
        }
        out
    }

    pub fn max_amplitude(&self, h: usize) -> f64 {
        self.points.iter().map(|p| p.amplitude(h)).fold(0.0, f64::max)
    }
}

/// Orbits at exactly `omega`: one shooting solve per branch segment that
/// crosses it, seeded with the interpolated endpoint states. Solves that
/// fail are skipped; orbits found twice are kept once.
pub fn orbits_at(model: &ReferenceModel, branch: &Branch, omega: f64) -> Vec<BranchPoint> {
    let mut out: Vec<BranchPoint> = Vec::new();
    for pair in branch.points.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let (lo, hi) = if a.omega <= b.omega { (a.omega, b.omega) } else { (b.omega, a.omega) };
        if omega < lo || omega > hi || hi == lo {
            continue;
        }
        let s = (omega - a.omega) / (b.omega - a.omega);
        let guess = a.state.iter().zip(&b.state).map(|(x, y)| x + s * (y - x)).collect();
        let Ok(p) = shoot(&model.problem(omega, a.phase, guess)) else { continue };
        let a1 = p.amplitude(1);
        if !out.iter().any(|q| (q.amplitude(1) - a1).abs() <= 1e-6 * a1.max(1e-300)) {
            out.push(p);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    pub max_halvings: usize,
    /// Largest accepted relative state change versus the predictor, guarding
    /// against silent jumps to another branch.
    pub jump_tolerance: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self { max_halvings: 6, jump_tolerance: 0.2 }
    }
}

fn rel_dist(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / n.max(1e-300)
}

/// Sequential continuation over `grid` starting from `start`, using the
/// previous orbit (secant-extrapolated) as predictor and halving the
/// frequency step on failure. Points at intermediate frequencies are kept.
pub fn continue_branch(
    model: &ReferenceModel,
    start: &BranchPoint,
    grid: &[f64],
    opts: &ContinuationOptions,
) -> Result<Branch> {
    if grid.windows(2).any(|p| p[1] == p[0]) {
        return Err(invalid("continuation grid must be strictly monotone"));
    }
    let mut branch = Branch { points: alloc::vec![start.clone()], ..Default::default() };
    for &target in grid {
        if target == branch.points.last().expect("non-empty").omega {
            continue;
        }
        let mut halvings = 0;
        loop {
            let prev = branch.points.last().expect("non-empty").clone();
            let step = (target - prev.omega) / (1u64 << halvings) as f64;
            let omega = prev.omega + step;
            let guess = predictor(&branch.points, omega);
            let attempt = shoot(&model.problem(omega, prev.phase, guess.clone()))
                .and_then(|p| {
                    if rel_dist(&p.state, &guess) > opts.jump_tolerance && branch.points.len() > 1 {
                        Err(Error::NoConvergence(format!("branch jump suspected at Ω = {omega}")))
                    } else {
                        Ok(p)
                    }
                });
            match attempt {
                Ok(p) => {
                    branch.points.push(p);
                    halvings = 0;
                    if omega == target {
                        break;
                    }
                }
                Err(e) => {
                    halvings += 1;
                    if halvings > opts.max_halvings {
                        branch.diagnostic = Some(format!("branch lost near Ω = {}: {e}", prev.omega));
                        return Ok(branch);
                    }
                }
            }
        }
    }
    branch.complete = true;
    Ok(branch)
}

fn predictor(points: &[BranchPoint], omega: f64) -> Vec<f64> {
    let last = &points[points.len() - 1];
    if points.len() < 2 {
        return last.state.clone();
    }
    let prev = &points[points.len() - 2];
    let d = last.omega - prev.omega;
    if d == 0.0 {
        return last.state.clone();
    }
    let s = (omega - last.omega) / d;
    last.state.iter().zip(&prev.state).map(|(a, b)| a + s * (a - b)).collect()
}

/// Settings for [`trace_branch`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArclengthOptions {
    /// Initial step in scaled units (state relative to its start norm,
    /// frequency relative to the start frequency).
    pub step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub max_points: usize,
    pub max_corrections: usize,
}

impl ArclengthOptions {
    pub fn new(omega_min: f64, omega_max: f64) -> Self {
        Self {
            step: 0.01,
            min_step: 1e-5,
            max_step: 0.05,
            omega_min,
            omega_max,
            max_points: 2000,
            max_corrections: 8,
        }
    }
}

struct Scaling {
    x: f64,
    w: f64,
}

impl Scaling {
    fn to_vec(&self, x: &[f64], w: f64) -> DVector<f64> {
        let n = x.len();
        DVector::from_iterator(n + 1, x.iter().map(|v| v / self.x).chain(core::iter::once(w / self.w)))
    }

    fn from_vec(&self, y: &DVector<f64>) -> (Vec<f64>, f64) {
        let n = y.len() - 1;
        ((0..n).map(|i| y[i] * self.x).collect(), y[n] * self.w)
    }
}

/// Residual and extended Jacobian in scaled variables.
fn extended(model: &ReferenceModel, phase: f64, sc: &Scaling, y: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (x, w) = sc.from_vec(y);
    let steps = model.options.steps_per_period;
    let f = model.forcing(w, phase);
    let (r, j) = periodicity(&model.plant, &f, &x, steps, true)?;
    let dw = 1e-7 * w;
    let (r2, _) = periodicity(&model.plant, &model.forcing(w + dw, phase), &x, steps, false)?;
    let n = x.len();
    let mut jac = DMatrix::<f64>::zeros(n, n + 1);
    let jx = j.expect("jacobian requested");
    for i in 0..n {
        for k in 0..n {
            jac[(i, k)] = jx[(i, k)];
        }
        jac[(i, n)] = (r2[i] - r[i]) / dw * sc.w / sc.x;
    }
    Ok((r / sc.x, jac))
}

fn tangent(jac: &DMatrix<f64>, prev: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    let n = jac.nrows();
    let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n + 1)).copy_from(jac);
    let mut b = DVector::<f64>::zeros(n + 1);
    b[n] = 1.0;
    match prev {
        Some(t) => {
            for k in 0..=n {
                a[(n, k)] = t[k];
            }
        }
        None => {
            // Start in the direction of increasing frequency.
            a[(n, n)] = 1.0;
        }
    }
    let t = a.lu().solve(&b).ok_or(Error::Singular("arclength tangent"))?;
    let norm = t.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Singular("arclength tangent"));
    }
    Ok(t / norm)
}

/// Pseudo-arclength continuation from `start`. `direction` (+1 or −1) picks
/// the initial sense in frequency. Stops when the frequency leaves the
/// window, the loop closes on the start point, or the step underflows.
pub fn trace_branch(
    model: &ReferenceModel,
    start: &BranchPoint,
    direction: f64,
    opts: &ArclengthOptions,
) -> Result<Branch> {
    if !(opts.step > 0.0 && opts.min_step > 0.0 && opts.max_step >= opts.min_step) {
        return Err(invalid("arclength steps must be positive"));
    }
    let phase = start.phase;
    let sc = Scaling {
        x: start.state.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12),
        w: start.omega,
    };
    let mut y = sc.to_vec(&start.state, start.omega);
    let y0 = y.clone();
    let (_, jac) = extended(model, phase, &sc, &y)?;
    let mut t = tangent(&jac, None)? * direction.signum();
    let t0 = t.clone();
    let mut ds = opts.step;
    let mut side = 0.0;
    let mut branch = Branch { points: alloc::vec![start.clone()], ..Default::default() };
    while branch.points.len() < opts.max_points {
        let pred = &y + &t * ds;
        let mut z = pred.clone();
        let mut ok = false;
        let mut corrections = 0;
        let mut last_res = 0.0;
        for it in 0..opts.max_corrections {
            let Ok((r, jac)) = extended(model, phase, &sc, &z) else { break };
            let n = r.len();
            let (x, _) = sc.from_vec(&z);
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            last_res = r.norm() * sc.x;
            if last_res <= model.options.tolerance * xn {
                ok = true;
                corrections = it;
                break;
            }
            let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
            a.view_mut((0, 0), (n, n + 1)).copy_from(&jac);
            for k in 0..=n {
                a[(n, k)] = t[k];
            }
            let mut rhs = DVector::<f64>::zeros(n + 1);
            rhs.rows_mut(0, n).copy_from(&(-&r));
            rhs[n] = -t.dot(&(&z - &pred));
            let Some(dz) = a.lu().solve(&rhs) else { break };
            z += dz;
            if !z.iter().all(|v| v.is_finite()) {
                break;
            }
        }
        if !ok {
            ds *= 0.5;
            if ds < opts.min_step {
                branch.diagnostic = Some(format!(
                    "step underflow near Ω = {} (residual {last_res:.3e})",
                    branch.points.last().expect("non-empty").omega
                ));
                return Ok(branch);
            }
            continue;
        }
        let (_, jac) = extended(model, phase, &sc, &z)?;
        let tn = tangent(&jac, Some(&t))?;
        let (x, w) = sc.from_vec(&z);
        let point = finish_point(&model.plant, &model.forcing(w, phase), x, &model.observation, &model.options, last_res, corrections)?;
        branch.points.push(point);
        let new_side = t0.dot(&(&z - &y0));
        let crossed = side < 0.0 && new_side >= 0.0;
        side = new_side;
        y = z;
        t = tn;
        if corrections <= 3 {
            ds = (ds * 1.5).min(opts.max_step);
        }
        if w < opts.omega_min || w > opts.omega_max {
            branch.complete = true;
            return Ok(branch);
        }
        // Closed loop: re-crossing the start hyperplane in the start sense.
        if crossed && (&y - &y0).norm() < 2.0 * opts.max_step {
            branch.closed = true;
            branch.complete = true;
            return Ok(branch);
        }
    }
    branch.diagnostic = Some(String::from("point limit reached"));
    Ok(branch)
}

/// State handed off from a settled virtual-test point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IsolaSeed {
    pub omega: f64,
    /// Forcing phase at the hand-off instant.
    pub phase: f64,
    /// Structure state `[η, η̇]`.
    pub state: Vec<f64>,
}

/// Outcome of [`capture_isola`].
#[derive(Debug, Clone, PartialEq)]
pub enum IsolaCapture {
    /// Closed (or partially traced) isolated branch.
    Isola(Branch),
    /// The seed converged to an orbit the classifier puts on the low branch.
    Rejected(BranchPoint),
}

/// Shoots from the seed, checks the landing with `classifier`, then traces
/// the branch until it closes.
pub fn capture_isola(
    model: &ReferenceModel,
    seed: &IsolaSeed,
    classifier: &BranchClassifier,
    opts: &ArclengthOptions,
) -> Result<IsolaCapture> {
    let start = shoot(&model.problem(seed.omega, seed.phase, seed.state.clone()))?;
    if classifier.classify(start.amplitude(1)) == BranchSide::Low {
        return Ok(IsolaCapture::Rejected(start));
    }
    let branch = trace_branch(model, &start, 1.0, opts)?;
    if branch.closed {
        return Ok(IsolaCapture::Isola(branch));
    }
    // Open in the first sense: trace the other way and join.
    let back = trace_branch(model, &start, -1.0, opts)?;
    let mut points: Vec<BranchPoint> = back.points.into_iter().skip(1).rev().collect();
    points.extend(branch.points);
    Ok(IsolaCapture::Isola(Branch {
        points,
        complete: branch.complete && back.complete,
        closed: false,
        diagnostic: branch.diagnostic.or(back.diagnostic),
    }))
}
