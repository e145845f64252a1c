use std::f64::consts::PI;

use harmonize_core::model::{CubicSpring, ExcitationCoupling, Exciter, Location, ModalStructure, Plant};
use harmonize_core::reference::{
    continue_branch, floquet, newmark_integrate, orbits_at, shoot, trace_branch, ArclengthOptions, ContinuationOptions,
    Forcing, ReferenceModel, ShootingOptions, Stability,
};
use harmonize_core::scenario::{shaw_beam_plant, BEAM_OMEGA};
use harmonize_core::Complex64;

fn linear_beam() -> Plant {
    let mut p = shaw_beam_plant("x1").unwrap();
    p.spring.stiffness = 0.0;
    p
}

/// Hardening Duffing oscillator `ẍ + 2Dωẋ + ω²x + k x³ = F cos(Ωt + θ)`.
fn duffing(k: f64) -> Plant {
    let s = ModalStructure::new(vec![10.0], vec![0.02], vec![Location { name: "p".into(), shape: vec![1.0] }]).unwrap();
    let ex = Exciter { mass: 0.05, resistance: 2.0, force_constant: 5.0, omega: 300.0, damping: 0.5 };
    Plant::new(s, ex, CubicSpring { stiffness: k, shape: vec![1.0] }, ExcitationCoupling::Force { drive_shape: vec![1.0] })
        .unwrap()
}

fn analytic_multipliers(plant: &Plant, omega: f64) -> Vec<Complex64> {
    let t = 2.0 * PI / omega;
    let s = &plant.structure;
    let mut out = Vec::new();
    for (w, d) in s.omega().iter().zip(s.damping()) {
        let wd = w * (1.0 - d * d).sqrt();
        out.push(Complex64::new(-d * w * t, wd * t).exp());
        out.push(Complex64::new(-d * w * t, -wd * t).exp());
    }
    out
}

#[test]
fn floquet_multipliers_match_exponentials() {
    let plant = linear_beam();
    let omega = 150.0;
    let f = Forcing { amplitude: 0.0, omega, phase: 0.0 };
    let out = newmark_integrate(&plant, &f, &[0.0; 4], f.period(), 40_000, true, false).unwrap();
    let (mults, stability, torus) = floquet(&out.sensitivity.unwrap()).unwrap();
    assert_eq!(stability, Stability::Stable);
    assert!(!torus);
    for a in analytic_multipliers(&plant, omega) {
        let err = mults.iter().map(|m| (m - a).norm()).fold(f64::INFINITY, f64::min);
        assert!(err < 1e-6, "multiplier {a} missed by {err}");
    }
}

#[test]
fn newmark_converges_at_second_order() {
    let plant = linear_beam();
    let s = &plant.structure;
    let (w, d) = (s.omega()[0], s.damping()[0]);
    let wd = w * (1.0 - d * d).sqrt();
    let (q0, v0) = (1e-3, 0.05);
    let span = 0.5;
    let exact = (-d * w * span).exp() * (q0 * (wd * span).cos() + (v0 + d * w * q0) / wd * (wd * span).sin());
    let f = Forcing { amplitude: 0.0, omega: 50.0, phase: 0.0 };
    let steps = [100usize, 200, 400, 800, 1600];
    let errors: Vec<f64> = steps
        .iter()
        .map(|&n| {
            let out = newmark_integrate(&plant, &f, &[q0, 0.0, v0, 0.0], span, n, false, false).unwrap();
            (out.end[0] - exact).abs()
        })
        .collect();
    // Least-squares slope of log(error) against log(h).
    let xs: Vec<f64> = steps.iter().map(|n| (span / *n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 5.0, ys.iter().sum::<f64>() / 5.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    assert!((slope - 2.0).abs() < 0.1, "observed order {slope}, errors {errors:?}");
}

#[test]
fn linear_shooting_matches_modal_response() {
    let plant = linear_beam();
    let drive = plant.structure.shape("x1").unwrap().to_vec();
    let obs = plant.structure.shape("x3").unwrap().to_vec();
    let model = ReferenceModel::new(plant.clone(), 2.0, "x3");
    for ratio in [0.6, 1.5, 2.5] {
        let omega = ratio * BEAM_OMEGA[0];
        let bp = model.shoot_from_linear(omega).unwrap();
        let s = &plant.structure;
        let x: Complex64 = (0..2)
            .map(|l| {
                let sl = Complex64::new(s.omega()[l].powi(2) - omega * omega, 2.0 * s.damping()[l] * s.omega()[l] * omega);
                obs[l] * drive[l] * 2.0 / sl
            })
            .sum();
        let err = (bp.response.get(1) - x).norm() / x.norm();
        assert!(err < 1e-4, "Ω/ω1 = {ratio}: relative error {err}");
        assert!(bp.is_stable());
    }
}

#[test]
fn shooting_rejects_bad_guess_length() {
    let model = ReferenceModel::new(shaw_beam_plant("x1").unwrap(), 2.0, "x3");
    let p = model.problem(50.0, 0.0, vec![0.0; 3]);
    assert!(shoot(&p).is_err());
}

#[test]
fn duffing_branch_folds_with_unstable_middle() {
    let mut model = ReferenceModel::new(duffing(100.0), 2.0, "p");
    model.options = ShootingOptions { steps_per_period: 400, ..Default::default() };
    let start = model.shoot_from_linear(8.0).unwrap();
    let mut opts = ArclengthOptions::new(8.0, 14.0);
    opts.max_step = 0.2;
    let branch = trace_branch(&model, &start, 1.0, &opts).unwrap();
    assert!(branch.complete, "{:?}", branch.diagnostic);
    let folds = branch.turning_points();
    assert_eq!(folds.len(), 2, "expected two folds, got {folds:?}");
    let (hi, lo) = (folds[0].max(folds[1]), folds[0].min(folds[1]));
    // Three coexisting orbits between the folds; the middle one is unstable.
    let omega = 0.5 * (hi + lo);
    let mut samples = branch.samples_at(omega);
    assert_eq!(samples.len(), 3);
    samples.sort_by(|a, b| a.h1.partial_cmp(&b.h1).unwrap());
    assert!(samples[0].stable && !samples[1].stable && samples[2].stable);
}

#[test]
fn orbits_at_resolves_every_coexisting_orbit() {
    let mut model = ReferenceModel::new(duffing(100.0), 2.0, "p");
    model.options = ShootingOptions { steps_per_period: 400, ..Default::default() };
    let start = model.shoot_from_linear(8.0).unwrap();
    let mut opts = ArclengthOptions::new(8.0, 14.0);
    opts.max_step = 0.2;
    let branch = trace_branch(&model, &start, 1.0, &opts).unwrap();
    let folds = branch.turning_points();
    let omega = 0.5 * (folds[0] + folds[1]);
    let mut orbits = orbits_at(&model, &branch, omega);
    assert_eq!(orbits.len(), 3);
    orbits.sort_by(|a, b| a.amplitude(1).partial_cmp(&b.amplitude(1)).unwrap());
    assert!(orbits[0].is_stable() && !orbits[1].is_stable() && orbits[2].is_stable());
    // One-term harmonic balance: a^2 [(w^2 - W^2 + 3k a^2/4)^2 + (2 D w W)^2] = F^2.
    let (w, d, k, f) = (10.0, 0.02, 100.0, 2.0);
    for o in &orbits {
        assert_eq!(o.omega, omega);
        let a = o.amplitude(1);
        let lhs = a * ((w * w - omega * omega + 0.75 * k * a * a).powi(2) + (2.0 * d * w * omega).powi(2)).sqrt();
        assert!((lhs - f).abs() < 0.05 * f, "a = {a}: balance {lhs}");
    }
    assert!(orbits_at(&model, &branch, 20.0).is_empty());
}

#[test]
fn natural_continuation_tracks_linear_response() {
    let model = ReferenceModel::new(linear_beam(), 2.0, "x3");
    let start = model.shoot_from_linear(0.8 * BEAM_OMEGA[0]).unwrap();
    let grid: Vec<f64> = (0..=10).map(|k| (0.8 + 0.04 * k as f64) * BEAM_OMEGA[0]).collect();
    let branch = continue_branch(&model, &start, &grid, &ContinuationOptions::default()).unwrap();
    assert!(branch.complete);
    assert!(branch.turning_points().is_empty());
    let peak = branch.points.iter().max_by(|a, b| a.amplitude(1).partial_cmp(&b.amplitude(1)).unwrap()).unwrap();
    assert!((peak.omega / BEAM_OMEGA[0] - 1.0).abs() < 0.05);
}
