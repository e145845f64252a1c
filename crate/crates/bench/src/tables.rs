//! Column schemas of the CSV artifacts and conversions to and from the core
//! records. Schema versions are recorded in the manifest.

use harmonize_core::analysis::DrivePointReport;
use harmonize_core::baseline::IterativePoint;
use harmonize_core::reference::{Branch, Stability};
use harmonize_core::sim::{Branch as Side, PointKind, PointRecord};
use harmonize_core::{Complex64, HarmonicSpectrum};

use crate::error::{validation, Result};
use crate::io::{sci, Table};

pub const POINTS_SCHEMA: (&str, u32) = ("points", 1);
pub const TIMING_SCHEMA: (&str, u32) = ("timing", 1);
pub const BRANCH_SCHEMA: (&str, u32) = ("branch", 1);
pub const MARGIN_SCHEMA: (&str, u32) = ("margin", 1);
pub const COMPARISON_SCHEMA: (&str, u32) = ("comparison", 1);
pub const TUNING_SCHEMA: (&str, u32) = ("tuning-sweep", 1);
pub const DUMP_SCHEMA: (&str, u32) = ("time-series", 1);

/// One stepped-sine grid point, common to harmonized, uncontrolled and
/// iterative runs.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRow {
    pub sweep: String,
    /// `main`, `jump`, `continuation` or `iterative`.
    pub kind: String,
    pub omega: f64,
    pub branch: Option<String>,
    pub settled: bool,
    /// Unknown for the iterative baseline.
    pub periodic: Option<bool>,
    pub clipped: bool,
    pub settles: u32,
    pub iterations: Option<usize>,
    pub settle_deviation: f64,
    pub aperiodicity: f64,
    /// Adaptive-filter estimate `F̃_h` at the end of the hold.
    pub estimate: Option<HarmonicSpectrum>,
    /// Window spectrum `F_h` of the applied excitation.
    pub excitation: HarmonicSpectrum,
    pub response: HarmonicSpectrum,
    pub command: HarmonicSpectrum,
}

fn kind_name(k: PointKind) -> &'static str {
    match k {
        PointKind::Main => "main",
        PointKind::Jump => "jump",
        PointKind::Continuation => "continuation",
    }
}

impl PointRow {
    pub fn from_sim(sweep: &str, p: &PointRecord) -> Self {
        Self {
            sweep: sweep.into(),
            kind: kind_name(p.kind).into(),
            omega: p.omega,
            branch: p.branch.map(|b| if b == Side::High { "high".into() } else { "low".into() }),
            settled: p.settled,
            periodic: Some(p.periodic),
            clipped: p.clipped,
            settles: p.settles,
            iterations: None,
            settle_deviation: p.settle_deviation,
            aperiodicity: p.aperiodicity,
            estimate: Some(p.estimate.clone()),
            excitation: p.excitation.clone(),
            response: p.response.clone(),
            command: p.command.clone(),
        }
    }

    pub fn from_iterative(sweep: &str, p: &IterativePoint) -> Self {
        Self {
            sweep: sweep.into(),
            kind: "iterative".into(),
            omega: p.omega,
            branch: None,
            settled: p.settled,
            periodic: None,
            clipped: false,
            settles: p.settles,
            iterations: Some(p.iteration_count()),
            settle_deviation: f64::NAN,
            aperiodicity: f64::NAN,
            estimate: None,
            excitation: p.excitation.clone(),
            response: p.response.clone(),
            command: p.command.clone(),
        }
    }

    /// `max_h ‖F_h‖ / level` over `harmonics`.
    pub fn distortion(&self, harmonics: impl IntoIterator<Item = usize>, level: f64) -> f64 {
        self.excitation.max_magnitude(harmonics) / level
    }
}

fn flag(b: bool) -> String {
    b.to_string()
}

fn spectra_columns(order: usize) -> Vec<String> {
    let mut c = Vec::new();
    for prefix in SPECTRA {
        for h in 0..=order {
            c.push(format!("{prefix}_re_{h}"));
            c.push(format!("{prefix}_im_{h}"));
        }
    }
    c
}

/// Spectrum column prefixes: filter estimate, window spectrum of the
/// excitation, response displacement, command voltage.
const SPECTRA: [&str; 4] = ["estimate", "excitation", "response", "command"];

const POINT_FIELDS: [&str; 12] = [
    "sweep",
    "kind",
    "omega_rad_s",
    "omega_ratio",
    "branch",
    "settled",
    "periodic",
    "clipped",
    "settles",
    "iterations",
    "settle_deviation",
    "aperiodicity",
];

pub fn points_table(rows: &[PointRow], order: usize, omega1: f64) -> Table {
    let mut cols: Vec<String> = POINT_FIELDS.iter().map(|s| s.to_string()).collect();
    cols.extend(spectra_columns(order));
    let mut t = Table::new(cols);
    for r in rows {
        let mut v = vec![
            r.sweep.clone(),
            r.kind.clone(),
            sci(r.omega),
            sci(r.omega / omega1),
            r.branch.clone().unwrap_or_default(),
            flag(r.settled),
            r.periodic.map_or_else(String::new, flag),
            flag(r.clipped),
            r.settles.to_string(),
            r.iterations.map_or_else(String::new, |i| i.to_string()),
            sci(r.settle_deviation),
            sci(r.aperiodicity),
        ];
        let nan = HarmonicSpectrum::from_coefficients(vec![Complex64::new(f64::NAN, f64::NAN); order + 1]);
        let spectra = [r.estimate.as_ref().unwrap_or(&nan), &r.excitation, &r.response, &r.command];
        for s in spectra {
            for h in 0..=order {
                let c = if h <= s.order() { s.get(h) } else { Complex64::new(0.0, 0.0) };
                v.push(sci(c.re));
                v.push(sci(c.im));
            }
        }
        t.push(v);
    }
    t
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(validation(format!("`{s}` is not a boolean"))),
    }
}

fn opt<T>(s: &str, f: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
    if s.is_empty() {
        Ok(None)
    } else {
        f(s).map(Some)
    }
}

/// Inverse of [`points_table`].
pub fn parse_points(t: &Table) -> Result<Vec<PointRow>> {
    let idx: Vec<usize> = POINT_FIELDS.iter().map(|f| t.column(f)).collect::<Result<_>>()?;
    let mut order = 0;
    while t.column(&format!("excitation_re_{}", order + 1)).is_ok() {
        order += 1;
    }
    let mut out = Vec::with_capacity(t.rows.len());
    for (i, row) in t.rows.iter().enumerate() {
        let cell = |k: usize| row[idx[k]].as_str();
        let spectrum = |prefix: &str| -> Result<HarmonicSpectrum> {
            let mut c = Vec::with_capacity(order + 1);
            for h in 0..=order {
                let re = t.f64_at(i, t.column(&format!("{prefix}_re_{h}"))?)?;
                let im = t.f64_at(i, t.column(&format!("{prefix}_im_{h}"))?)?;
                c.push(Complex64::new(re, im));
            }
            Ok(HarmonicSpectrum::from_coefficients(c))
        };
        let estimate = spectrum("estimate")?;
        let unknown_estimate = estimate.get(1).re.is_nan();
        out.push(PointRow {
            sweep: cell(0).into(),
            kind: cell(1).into(),
            omega: t.f64_at(i, idx[2])?,
            branch: opt(cell(4), |s| Ok(s.to_string()))?,
            settled: parse_bool(cell(5))?,
            periodic: opt(cell(6), parse_bool)?,
            clipped: parse_bool(cell(7))?,
            settles: cell(8).parse().map_err(|_| validation("bad settle count"))?,
            iterations: opt(cell(9), |s| s.parse().map_err(|_| validation("bad iteration count")))?,
            settle_deviation: t.f64_at(i, idx[10])?,
            aperiodicity: t.f64_at(i, idx[11])?,
            estimate: if unknown_estimate { None } else { Some(estimate) },
            excitation: spectrum("excitation")?,
            response: spectrum("response")?,
            command: spectrum("command")?,
        });
    }
    Ok(out)
}

/// Wall-clock durations; kept apart from the hashed tables because they
/// differ between otherwise identical runs.
pub fn timing_table(rows: &[(String, f64, f64)]) -> Table {
    let mut t = Table::new(vec!["sweep".into(), "omega_rad_s".into(), "wall_time_s".into()]);
    for (s, w, d) in rows {
        t.push(vec![s.clone(), sci(*w), sci(*d)]);
    }
    t
}

fn stability_name(s: Stability) -> &'static str {
    match s {
        Stability::Stable => "stable",
        Stability::Unstable => "unstable",
        Stability::Marginal => "marginal",
    }
}

pub fn branch_table(branches: &[(String, Branch)], omega1: f64) -> Table {
    let n_mult = branches.iter().flat_map(|b| b.1.points.iter()).map(|p| p.multipliers.len()).max().unwrap_or(0);
    let mut cols: Vec<String> = [
        "branch", "index", "omega_rad_s", "omega_ratio", "h1_m", "h3_m", "stability", "torus", "residual",
        "iterations",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for k in 0..n_mult {
        cols.push(format!("multiplier_re_{k}"));
        cols.push(format!("multiplier_im_{k}"));
    }
    let mut t = Table::new(cols);
    for (name, b) in branches {
        for (i, p) in b.points.iter().enumerate() {
            let mut v = vec![
                name.clone(),
                i.to_string(),
                sci(p.omega),
                sci(p.omega / omega1),
                sci(p.amplitude(1)),
                sci(p.amplitude(3)),
                stability_name(p.stability).into(),
                flag(p.torus),
                sci(p.residual),
                p.iterations.to_string(),
            ];
            for k in 0..n_mult {
                let m = p.multipliers.get(k).copied().unwrap_or(Complex64::new(f64::NAN, f64::NAN));
                v.push(sci(m.re));
                v.push(sci(m.im));
            }
            t.push(v);
        }
    }
    t
}

pub fn margin_table(report: &DrivePointReport, omega1: f64, gain: f64) -> Table {
    let mut t = Table::new(
        ["location", "kp_v_per_n", "kp_normalized", "omega_rad_s", "omega_ratio", "real_part"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    );
    for c in &report.candidates {
        for s in &c.scans {
            for (w, r) in s.frequencies.iter().zip(&s.real_parts) {
                t.push(vec![
                    c.location.clone(),
                    sci(s.kp),
                    sci(s.kp * gain),
                    sci(*w),
                    sci(w / omega1),
                    sci(*r),
                ]);
            }
        }
    }
    t
}
