//! Acceptance suite on the shipped beam scenario. Each criterion prints one
//! `PASS`/`FAIL` line to stderr (outside the test harness capture) and
//! fails its test when not met. The expensive runs are shared.

use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;

use harmonize_bench::commands::{iterate, reference, run_tuning, simulate, stability, IsolaSeedFile, NamedBranch};
use harmonize_bench::grid::{parse_grid, GridSegment};
use harmonize_bench::metrics::{
    distortion_count, find_jump, jump_lead_in_steps, max_distortion, mean_iterations, upper_fold, ReferenceSet,
};
use harmonize_bench::scenario::Scenario;
use harmonize_bench::schedule::ScheduleFile;
use harmonize_bench::tables::PointRow;
use harmonize_core::analysis::stability_margin;
use harmonize_core::baseline::broyden_update;
use harmonize_core::control::{synthesize_command, Harmonizer};
use harmonize_core::estimator::AdaptiveFilter;
use harmonize_core::reference::{floquet, newmark_integrate, Forcing};
use harmonize_core::scenario::{default_control, physical_gains, shaw_beam_plant, BEAM_OMEGA, SHAW_EXCITER};
use harmonize_core::sim::{PointKind, SimConfig, VirtualTest};
use harmonize_core::spectrum::{window_spectrum, HarmonicSpectrum};
use harmonize_core::Complex64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

fn report(criterion: u32, title: &str, pass: bool, details: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {criterion} [{verdict}] {title}: {details}");
}

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn scenario() -> &'static Scenario {
    static S: OnceLock<Scenario> = OnceLock::new();
    S.get_or_init(|| Scenario::load(&shipped("shaw-beam.toml")).unwrap())
}

fn schedule() -> &'static ScheduleFile {
    static S: OnceLock<ScheduleFile> = OnceLock::new();
    S.get_or_init(|| ScheduleFile::load(&shipped("shaw-beam-schedule.toml")).unwrap())
}

struct Runs {
    /// Rows per sweep, in schedule order.
    sweeps: Vec<(String, Vec<PointRow>)>,
    seed: Option<IsolaSeedFile>,
}

impl Runs {
    fn sweep(&self, name: &str) -> &[PointRow] {
        &self.sweeps.iter().find(|s| s.0 == name).expect("sweep present").1
    }

    fn all(&self) -> Vec<PointRow> {
        self.sweeps.iter().flat_map(|s| s.1.clone()).collect()
    }
}

fn run(scn: &Scenario, sched: &ScheduleFile) -> Runs {
    let (runs, _) = simulate(scn, sched, None).unwrap();
    let mut seed = None;
    for r in &runs {
        assert!(r.record.failures.is_empty(), "{}: {:?}", r.name, r.record.failures);
        if let (None, Some(j)) = (&seed, r.record.of_kind(PointKind::Jump).next()) {
            let classifier = sched.sweeps.iter().find(|s| s.name == r.name).unwrap().schedule(scn.omega1()).unwrap().jump;
            seed = Some(IsolaSeedFile {
                sweep: r.name.clone(),
                seed: harmonize_core::reference::IsolaSeed {
                    omega: j.omega,
                    phase: j.forcing_phase(),
                    state: j.end_state.clone(),
                },
                classifier: classifier.and_then(|c| c.classifier),
            });
        }
    }
    let sweeps = runs
        .iter()
        .map(|r| (r.name.clone(), r.record.points.iter().map(|p| PointRow::from_sim(&r.name, p)).collect()))
        .collect();
    Runs { sweeps, seed }
}

fn harmonized() -> &'static Runs {
    static R: OnceLock<Runs> = OnceLock::new();
    R.get_or_init(|| run(scenario(), schedule()))
}

fn uncontrolled() -> &'static Runs {
    static R: OnceLock<Runs> = OnceLock::new();
    R.get_or_init(|| {
        let main = ScheduleFile { sweeps: schedule().sweeps.iter().filter(|s| s.name == "main").cloned().collect() };
        run(&scenario().without_harmonization(), &main)
    })
}

fn window() -> Vec<GridSegment> {
    let r = &scenario().reference;
    vec![GridSegment {
        start_omega_ratio: r.omega_min_ratio,
        stop_omega_ratio: r.omega_max_ratio,
        step_omega_ratio: r.omega_max_ratio - r.omega_min_ratio,
    }]
}

fn branches() -> &'static Vec<NamedBranch> {
    static B: OnceLock<Vec<NamedBranch>> = OnceLock::new();
    B.get_or_init(|| reference(scenario(), &window(), harmonized().seed.as_ref()).unwrap())
}

fn ratio(omega: f64) -> f64 {
    omega / scenario().omega1()
}

#[test]
fn criterion_1_distortion_without_control() {
    let rows = uncontrolled().sweep("main");
    let level = scenario().control.target_level_n_or_m_s2;
    let f3 = max_distortion(rows, 3, level);
    let pass = (0.35..=0.65).contains(&f3);
    report(1, "distortion without control", pass, &format!("max |F_3|/F = {f3:.4} over {} points, need [0.35, 0.65]", rows.len()));
    assert!(pass);
}

#[test]
fn criterion_2_distortion_with_control() {
    let runs = harmonized();
    let scn = scenario();
    let level = scn.control.target_level_n_or_m_s2;
    let harmonics: Vec<usize> = scn.control.harmonics.clone();
    let rows = runs.all();
    let c = distortion_count(&rows, &harmonics, level, 1e-4);
    // The isolated branch must have been reached for the count to cover it.
    let on_isola = rows.iter().filter(|r| r.kind != "main" && r.branch.as_deref() == Some("high")).count();
    let landed = rows.iter().filter(|r| r.kind == "jump").all(|r| r.branch.as_deref() == Some("high"));
    let pass = c.fraction() >= 0.95 && landed && on_isola > 0;
    report(
        2,
        "distortion with control",
        pass,
        &format!(
            "{}/{} periodic points below 1e-4 ({:.1}%), {} non-periodic exempt, jumps landed on isola: {landed}, need >= 95%",
            c.below,
            c.counted,
            100.0 * c.fraction(),
            c.exempt
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_reference_tracking() {
    let scn = scenario();
    let set = ReferenceSet {
        model: scn.reference_model().unwrap(),
        branches: branches().iter().filter(|b| b.name != "seed-rejected").map(|b| (b.name.clone(), b.branch.clone())).collect(),
    };
    let has_isola = set.branches.iter().any(|b| b.0 == "isola");
    let rows: Vec<PointRow> = harmonized().all().into_iter().filter(|r| r.periodic != Some(false)).collect();
    let matches: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = rows
            .chunks(rows.len().div_ceil(4))
            .map(|chunk| {
                let set = &set;
                s.spawn(move || {
                    chunk
                        .iter()
                        .map(|r| (r, set.match_stable(r.omega, r.response.magnitude(1), r.response.magnitude(3))))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    let matched: Vec<_> = matches.iter().filter_map(|(r, m)| m.as_ref().map(|m| (r, m))).collect();
    let worst = matched.iter().map(|(_, m)| m.worst()).fold(0.0, f64::max);
    let on_isola = matched.iter().filter(|(_, m)| m.branch == "isola").count();
    let unmatched: Vec<f64> = matches.iter().filter(|(_, m)| m.is_none()).map(|(r, _)| ratio(r.omega)).collect();
    let pass = has_isola && on_isola >= 10 && matched.len() >= 100 && worst < 0.01;
    report(
        3,
        "reference tracking",
        pass,
        &format!(
            "worst H1/H3 error {:.3}% over {} points ({on_isola} on the isola), {} periodic points without a stable orbit {unmatched:.3?}, need < 1%",
            100.0 * worst,
            matched.len(),
            unmatched.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_jump_behaviour() {
    let main = branches().iter().find(|b| b.name == "main").unwrap();
    let fold = upper_fold(&main.branch).unwrap();
    let main_rows = |r: &Runs| -> Vec<PointRow> { r.sweep("main").to_vec() };
    let free = find_jump(&main_rows(uncontrolled())).unwrap();
    let ctrl = find_jump(&main_rows(harmonized())).unwrap();
    let lead_free = jump_lead_in_steps(&free, fold);
    let lead_ctrl = jump_lead_in_steps(&ctrl, fold);
    let free_ok = lead_free >= 2.0;
    let ctrl_ok = lead_ctrl.abs() <= 1.0;
    report(
        4,
        "jump behaviour",
        free_ok && ctrl_ok,
        &format!(
            "turning point {:.4}; without control leaves after {:.4} ({lead_free:+.2} steps early, need >= 2): {}; \
             with control leaves after {:.4} ({lead_ctrl:+.2} steps, need within 1): {}",
            ratio(fold),
            ratio(free.last_high),
            if free_ok { "ok" } else { "not met" },
            ratio(ctrl.last_high),
            if ctrl_ok { "ok" } else { "not met" },
        ),
    );
    assert!(free_ok && ctrl_ok);
}

#[test]
fn criterion_5_drive_point_verdicts() {
    let grid = parse_grid("0.5:8:0.001").unwrap();
    assert_eq!(scenario().control.kp_normalized, 3.0);
    let (_, v) = stability(scenario(), &["x1".into(), "x2".into()], &grid).unwrap();
    let x1 = &v[0];
    let x2 = &v[1];
    let x1_ok = x1.negative_crossings_omega_ratio.is_empty() && x1.positive_crossings_omega_ratio.is_empty();
    let x2_ok = x2.negative_crossings_omega_ratio.iter().any(|r| (r - 3.0).abs() <= 0.15);
    report(
        5,
        "drive-point verdicts",
        x1_ok && x2_ok,
        &format!(
            "x1 sign changes {:?}/{:?} (need none): {}; x2 negative crossings {:.3?} (need one in 3 +- 0.15): {}",
            x1.negative_crossings_omega_ratio,
            x1.positive_crossings_omega_ratio,
            if x1_ok { "ok" } else { "not met" },
            x2.negative_crossings_omega_ratio,
            if x2_ok { "ok" } else { "not met" },
        ),
    );
    assert!(x1_ok && x2_ok);
}

#[test]
fn criterion_6_mass_ratios() {
    let grid = parse_grid("0.5:8:0.5").unwrap();
    let (_, v) = stability(scenario(), &["x1".into(), "x2".into()], &grid).unwrap();
    let (x1, x2) = (&v[0].mass_ratios, &v[1].mass_ratios);
    let near = |x: f64, a: f64| ((x - a) / a).abs() <= 0.02;
    let checks = [
        ("x1 mode 1 < 1e-3", x1[0], x1[0] < 1e-3),
        ("x1 mode 2 < 0.02", x1[1], x1[1] < 0.02),
        ("x2 mode 1 = 0.1 +- 2%", x2[0], near(x2[0], 0.1)),
        ("x2 mode 2 = 0.85 +- 2%", x2[1], near(x2[1], 0.85)),
    ];
    let pass = checks.iter().all(|c| c.2);
    let details: Vec<String> =
        checks.iter().map(|(n, x, ok)| format!("{n}: {x:.5} {}", if *ok { "ok" } else { "not met" })).collect();
    report(6, "mass ratios", pass, &details.join("; "));
    assert!(pass);
}

#[test]
fn criterion_7_tuning() {
    let scn = scenario();
    let t = run_tuning(scn).unwrap();
    let step = scn.tuning.sweep_ratio;
    let within = |x: f64, a: f64| x >= a / step * (1.0 - 1e-9) && x <= a * step * (1.0 + 1e-9);
    let kp_ok = within(t.kp, 3.0);
    let ki_ok = within(t.ki, 2.0);
    // Onsets must have been detected, and the selections are half of them.
    let half = |x: f64, c: Option<f64>| c.is_some_and(|c| (x - c / 2.0).abs() < 1e-12);
    let halves = half(t.kp, t.kp_critical) && half(t.ki, t.ki_critical);
    let pass = kp_ok && ki_ok && halves;
    report(
        7,
        "tuning",
        pass,
        &format!(
            "kp = {:.3} (critical {:?}), ki = {:.3} (critical {:?}), cutoff {:.3} w1; need kp in [{:.2}, {:.2}], ki in [{:.2}, {:.2}]",
            t.kp,
            t.kp_critical,
            t.ki,
            t.ki_critical,
            t.cutoff / scn.omega1(),
            3.0 / step,
            3.0 * step,
            2.0 / step,
            2.0 * step
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_iterative_baseline() {
    let sched = ScheduleFile::load(&shipped("shaw-beam-iterative.toml")).unwrap();
    let runs = iterate(scenario(), &sched).unwrap();
    let rows: Vec<PointRow> =
        runs.iter().flat_map(|(n, r)| r.points.iter().map(move |p| PointRow::from_iterative(n, p))).collect();
    let failures: usize = runs.iter().map(|(_, r)| r.failures.len()).sum();
    let expected = sched.sweeps.iter().map(|s| s.schedule(scenario().omega1()).unwrap().frequencies.len()).sum::<usize>();
    let its: Vec<usize> = rows.iter().map(|r| r.iterations.unwrap()).collect();
    let converged = failures == 0 && rows.len() == expected && rows.iter().all(|r| r.settled);
    let range_ok = its.iter().all(|&i| (1..=9).contains(&i));
    let mean = mean_iterations(&rows).unwrap_or(f64::NAN);
    // Settles of the proposed method at the same frequencies.
    let main = harmonized().sweep("main");
    let ratios: Vec<f64> = rows
        .iter()
        .map(|r| {
            let p = main.iter().find(|p| (p.omega - r.omega).abs() < 1e-9 * r.omega).expect("frequency on the main grid");
            r.settles as f64 / p.settles as f64
        })
        .collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = converged && range_ok && mean <= 5.0 && min_ratio >= 3.0;
    report(
        8,
        "iterative baseline",
        pass,
        &format!(
            "{} points converged: {converged}, iterations {its:?} (mean {mean:.2}, need 1..=9 and mean <= 5), settle ratio >= {min_ratio:.1} (need >= 3)",
            rows.len()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- properties

fn fft_coefficients(samples: &[f64], order: usize) -> Vec<Complex64> {
    let n = samples.len();
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> =
        samples.iter().map(|x| rustfft::num_complex::Complex::new(*x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (0..=order)
        .map(|h| {
            let s = if h == 0 { 1.0 } else { 2.0 } / n as f64;
            Complex64::new(buf[h].re * s, buf[h].im * s)
        })
        .collect()
}

fn random_spectrum(rng: &mut ChaCha8Rng, order: usize) -> HarmonicSpectrum {
    let mut s = HarmonicSpectrum::zeros(order);
    s.set(0, Complex64::new(rng.random_range(-1.0..1.0), 0.0));
    for h in 1..=order {
        s.set(h, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    }
    s
}

fn filter_properties() -> Result<(), String> {
    let omega = 50.0;
    let n = 400;
    let dt = 2.0 * PI / omega / n as f64;
    // Fixed point: an exact estimate stays put.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spec = random_spectrum(&mut rng, 4);
    let mut f = AdaptiveFilter::new(4, 5.0).unwrap();
    f.set_estimate(&spec);
    for k in 0..10 * n {
        let tau = omega * k as f64 * dt;
        f.step(spec.evaluate(tau), tau, dt).unwrap();
    }
    let drift = (0..=4).map(|h| (f.estimate().get(h) - spec.get(h)).norm()).fold(0.0, f64::max);
    if drift > 1e-9 {
        return Err(format!("fixed point drifted by {drift:e}"));
    }
    // Low pass: time constant 1/ω_LP on a unit cosine.
    let cutoff = omega / 10.0;
    let mut f = AdaptiveFilter::new(2, cutoff).unwrap();
    let mut t_cross = None;
    for k in 0..20 * n {
        let tau = omega * k as f64 * dt;
        f.step(tau.cos(), tau, dt).unwrap();
        if t_cross.is_none() && f.estimate().magnitude(1) >= 1.0 - (-1.0f64).exp() {
            t_cross = Some((k + 1) as f64 * dt);
        }
    }
    let tc = t_cross.ok_or("estimate never reached 1 - 1/e")? * cutoff;
    if (tc - 1.0).abs() > 0.1 {
        return Err(format!("time constant {tc:.3}/w_LP"));
    }
    Ok(())
}

fn harmonizer_fixed_point() -> Result<(), String> {
    let ex = SHAW_EXCITER;
    let g = ex.force_constant / ex.resistance;
    let omega = 40.0;
    let cutoff = omega / 10.0;
    let n = 200;
    let dt = 2.0 * PI / omega / n as f64;
    let mut d = HarmonicSpectrum::zeros(3);
    d.set(2, Complex64::new(0.4, -0.2));
    d.set(3, Complex64::new(-0.1, 0.3));
    let mut filter = AdaptiveFilter::new(3, cutoff).unwrap();
    let mut harm = Harmonizer::new(vec![2, 3], physical_gains(&ex, cutoff, 3.0, 2.0)).unwrap();
    let mut higher = HarmonicSpectrum::zeros(3);
    for k in 0..400 * n {
        let tau = omega * k as f64 * dt;
        let f = g * synthesize_command(Complex64::new(0.5, 0.0), &higher, tau) + d.evaluate(tau);
        filter.step(f, tau, dt).unwrap();
        higher = harm.step(filter.estimate(), dt).unwrap();
    }
    for h in [2, 3] {
        let expected = -d.get(h) * ex.resistance / ex.force_constant;
        let err = (higher.get(h) - expected).norm() / expected.norm();
        if err > 1e-6 {
            return Err(format!("U_{h} off by {err:e}"));
        }
    }
    Ok(())
}

fn stability_sign_prediction() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let locations = ["x1", "x2", "x3", "x4"];
    let cases = 40;
    let (mut hits, mut unstable) = (0, 0);
    for _ in 0..cases {
        let mut plant = shaw_beam_plant(locations[rng.random_range(0..4)]).unwrap();
        plant.spring.stiffness = 0.0;
        let harmonic_omega = rng.random_range(2.5..4.5) * BEAM_OMEGA[0];
        let kp_n = rng.random_range(0.0..2.0);
        let mut control = default_control(&SHAW_EXCITER);
        control.fundamental_enabled = false;
        control.harmonics = vec![2];
        control.order = 2;
        control.voltage_limit = 1e9;
        control.gains = physical_gains(&SHAW_EXCITER, control.cutoff, kp_n, 0.5);
        let g = control.gains;
        let predicted_stable =
            stability_margin(&plant.structure, &plant.exciter, &plant.coupling, harmonic_omega, g.kp, g.ki) > 0.0;
        let omega = harmonic_omega / 2.0;
        let mut t = VirtualTest::new(plant, control, SimConfig::new("x3"), omega).unwrap();
        t.harmonizer_mut().set_integrator(2, Complex64::new(1.0, 0.0));
        let periods = |secs: f64| (secs * omega / (2.0 * PI)).ceil() as usize;
        t.hold(periods(1.0), 1).unwrap();
        let a = t.harmonizer().integrator(2).norm();
        t.hold(periods(3.0), 1).unwrap();
        let grows = t.harmonizer().integrator(2).norm() > a;
        unstable += grows as usize;
        hits += (predicted_stable != grows) as usize;
    }
    if unstable == 0 || unstable == cases {
        return Err(format!("degenerate grid with {unstable} unstable loops"));
    }
    if (hits as f64) < 0.95 * cases as f64 {
        return Err(format!("{hits}/{cases} signs predicted"));
    }
    Ok(())
}

fn floquet_and_newmark() -> Result<(), String> {
    let mut plant = shaw_beam_plant("x1").unwrap();
    plant.spring.stiffness = 0.0;
    let omega = 150.0;
    let f = Forcing { amplitude: 0.0, omega, phase: 0.0 };
    let out = newmark_integrate(&plant, &f, &[0.0; 4], f.period(), 40_000, true, false).map_err(|e| e.to_string())?;
    let (mults, _, _) = floquet(&out.sensitivity.unwrap()).map_err(|e| e.to_string())?;
    let t = f.period();
    let s = &plant.structure;
    for (w, d) in s.omega().iter().zip(s.damping()) {
        let wd = w * (1.0 - d * d).sqrt();
        for sign in [1.0, -1.0] {
            let a = Complex64::new(-d * w * t, sign * wd * t).exp();
            let err = mults.iter().map(|m| (m - a).norm()).fold(f64::INFINITY, f64::min);
            if err > 1e-6 {
                return Err(format!("multiplier {a} missed by {err:e}"));
            }
        }
    }
    let (w, d) = (s.omega()[0], s.damping()[0]);
    let wd = w * (1.0 - d * d).sqrt();
    let (q0, v0, span) = (1e-3, 0.05, 0.5);
    let exact = (-d * w * span).exp() * (q0 * (wd * span).cos() + (v0 + d * w * q0) / wd * (wd * span).sin());
    let steps = [100usize, 200, 400, 800, 1600];
    let mut pts = Vec::new();
    for &n in &steps {
        let out = newmark_integrate(&plant, &f, &[q0, 0.0, v0, 0.0], span, n, false, false).map_err(|e| e.to_string())?;
        pts.push(((span / n as f64).ln(), (out.end[0] - exact).abs().ln()));
    }
    let k = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    if (slope - 2.0).abs() > 0.1 {
        return Err(format!("Newmark order {slope:.3}"));
    }
    Ok(())
}

fn broyden_secant() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 2..8 {
        let mut j = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let du = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let dr = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        broyden_update(&mut j, &du, &dr).map_err(|e| e.to_string())?;
        let err = (&j * &du - &dr).norm() / dr.norm();
        if err > 1e-14 {
            return Err(format!("secant residual {err:e} at n = {n}"));
        }
    }
    Ok(())
}

fn fft_round_trip() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for order in 1..8 {
        let spec = random_spectrum(&mut rng, order);
        let n = 96;
        let tau0 = rng.random_range(0.0..2.0 * PI);
        let samples: Vec<f64> = (0..2 * n).map(|k| spec.evaluate(tau0 + 2.0 * PI * k as f64 / n as f64)).collect();
        let back = window_spectrum(&samples, n, tau0, order).map_err(|e| e.to_string())?;
        let oracle = fft_coefficients(&samples[..n], order);
        for h in 0..=order {
            // The FFT sees the series shifted by τ0.
            let shifted = oracle[h] * Complex64::from_polar(1.0, -(h as f64) * tau0);
            let err = (back.get(h) - spec.get(h)).norm().max((shifted - spec.get(h)).norm());
            if err > 1e-9 {
                return Err(format!("h = {h}: round trip error {err:e}"));
            }
        }
    }
    Ok(())
}

#[test]
fn criterion_9_property_suites() {
    let suites: [(&str, fn() -> Result<(), String>); 6] = [
        ("adaptive filter", filter_properties),
        ("harmonizer fixed point", harmonizer_fixed_point),
        ("stability sign", stability_sign_prediction),
        ("Floquet and Newmark", floquet_and_newmark),
        ("Broyden secant", broyden_secant),
        ("synthesis/FFT", fft_round_trip),
    ];
    let results: Vec<(&str, Result<(), String>)> = suites.iter().map(|(n, f)| (*n, f())).collect();
    let pass = results.iter().all(|r| r.1.is_ok());
    let details: Vec<String> = results
        .iter()
        .map(|(n, r)| match r {
            Ok(()) => format!("{n} ok"),
            Err(e) => format!("{n} FAILED ({e})"),
        })
        .collect();
    report(9, "property suites", pass, &details.join(", "));
    assert!(pass);
}
