//! Figures of merit of stepped-sine runs: distortion levels, premature
//! jumps, agreement with the reference branches and settle counts.

use harmonize_core::reference::{orbits_at, Branch, BranchPoint, ReferenceModel};
use serde::Serialize;

use crate::tables::PointRow;

/// Largest `‖F_h‖ / level` over the rows.
pub fn max_distortion(rows: &[PointRow], h: usize, level: f64) -> f64 {
    rows.iter().map(|r| r.excitation.magnitude(h) / level).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistortionCount {
    /// Periodic points below the limit.
    pub below: usize,
    /// Periodic points considered.
    pub counted: usize,
    /// Points flagged non-periodic (excluded).
    pub exempt: usize,
}

impl DistortionCount {
    pub fn fraction(&self) -> f64 {
        if self.counted == 0 {
            0.0
        } else {
            self.below as f64 / self.counted as f64
        }
    }
}

/// Counts points with `max_h ‖F_h‖/level < limit`, skipping points flagged
/// non-periodic.
pub fn distortion_count(rows: &[PointRow], harmonics: &[usize], level: f64, limit: f64) -> DistortionCount {
    let mut c = DistortionCount { below: 0, counted: 0, exempt: 0 };
    for r in rows {
        if r.periodic == Some(false) {
            c.exempt += 1;
            continue;
        }
        c.counted += 1;
        if r.distortion(harmonics.iter().copied(), level) < limit {
            c.below += 1;
        }
    }
    c
}

/// Downward jump in a forward sweep: the last point before the response
/// fundamental falls below half of its previous value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jump {
    pub last_high: f64,
    pub first_low: f64,
}

pub fn find_jump(rows: &[PointRow]) -> Option<Jump> {
    rows.windows(2).find_map(|p| {
        let (a, b) = (p[0].response.magnitude(1), p[1].response.magnitude(1));
        (b < 0.5 * a).then_some(Jump { last_high: p[0].omega, first_low: p[1].omega })
    })
}

/// Signed distance of the jump from the reference turning point in local
/// grid steps: positive when the sweep leaves the high branch early.
pub fn jump_lead_in_steps(jump: &Jump, fold: f64) -> f64 {
    (fold - jump.last_high) / (jump.first_low - jump.last_high)
}

/// Highest-frequency turning point of a branch.
pub fn upper_fold(branch: &Branch) -> Option<f64> {
    branch.turning_points().into_iter().reduce(f64::max)
}

/// Reference orbit closest to a measured point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceMatch {
    pub omega: f64,
    pub branch: String,
    pub stable: bool,
    pub reference_h1: f64,
    pub reference_h3: f64,
    pub measured_h1: f64,
    pub measured_h3: f64,
    pub error_h1: f64,
    pub error_h3: f64,
}

impl ReferenceMatch {
    pub fn worst(&self) -> f64 {
        self.error_h1.max(self.error_h3)
    }
}

/// Named reference branches that can be re-solved at any frequency.
pub struct ReferenceSet {
    pub model: ReferenceModel,
    pub branches: Vec<(String, Branch)>,
}

impl ReferenceSet {
    /// Every orbit at exactly `omega`, tagged with its branch name.
    pub fn orbits(&self, omega: f64) -> Vec<(String, BranchPoint)> {
        self.branches
            .iter()
            .flat_map(|(name, b)| orbits_at(&self.model, b, omega).into_iter().map(move |p| (name.clone(), p)))
            .collect()
    }

    /// Stable orbit closest in response fundamental to the measurement.
    pub fn match_stable(&self, omega: f64, h1: f64, h3: f64) -> Option<ReferenceMatch> {
        self.orbits(omega)
            .into_iter()
            .filter(|(_, p)| p.is_stable())
            .map(|(name, p)| ReferenceMatch {
                omega,
                branch: name,
                stable: true,
                reference_h1: p.amplitude(1),
                reference_h3: p.amplitude(3),
                measured_h1: h1,
                measured_h3: h3,
                error_h1: (h1 - p.amplitude(1)).abs() / p.amplitude(1),
                error_h3: (h3 - p.amplitude(3)).abs() / p.amplitude(3),
            })
            .min_by(|a, b| a.error_h1.total_cmp(&b.error_h1))
    }
}

/// Mean settles per point of `b` over mean settles per point of `a`.
pub fn settle_ratio(a: &[PointRow], b: &[PointRow]) -> f64 {
    let mean = |r: &[PointRow]| r.iter().map(|p| p.settles as f64).sum::<f64>() / r.len().max(1) as f64;
    mean(b) / mean(a)
}

pub fn mean_iterations(rows: &[PointRow]) -> Option<f64> {
    let its: Vec<usize> = rows.iter().filter_map(|r| r.iterations).collect();
    (!its.is_empty()).then(|| its.iter().sum::<usize>() as f64 / its.len() as f64)
}
