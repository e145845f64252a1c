//! Schedule files: one or more named stepped-sine sweeps, each with its own
//! frequency grid (ratios to `ω_1`) and an optional jump to an isolated
//! branch.

use std::path::Path;

use harmonize_core::sim::{BranchClassifier, Direction, JumpPlan, SteppedSineSchedule};
use serde::{Deserialize, Serialize};

use crate::error::{validation, BenchError, Result};
use crate::grid::{expand, GridSegment};
use crate::io::read_text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    pub sweeps: Vec<Sweep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub name: String,
    pub grid: Vec<GridSegment>,
    #[serde(default = "default_hold")]
    pub hold_periods: usize,
    #[serde(default = "default_window")]
    pub window_periods: usize,
    /// Ramp duration between grid points in periods of the first mode.
    #[serde(default = "default_ramp")]
    pub ramp_mode1_periods: f64,
    #[serde(default)]
    pub abort_on_failure: bool,
    #[serde(default)]
    pub jump: Option<JumpSection>,
}

/// Frequency and voltage step after a grid point, then continuation on the
/// branch reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSection {
    /// Grid point (ratio to `ω_1`) after whose hold the jump is made.
    pub after_omega_ratio: f64,
    pub delta_omega_ratio: f64,
    pub delta_voltage_v: f64,
    #[serde(default)]
    pub continuation: Vec<GridSegment>,
    /// Response fundamental amplitudes at the landing frequency used to
    /// decide which branch was reached.
    #[serde(default)]
    pub low_branch_response_m: Option<f64>,
    #[serde(default)]
    pub high_branch_response_m: Option<f64>,
}

fn default_hold() -> usize {
    600
}

fn default_window() -> usize {
    300
}

fn default_ramp() -> f64 {
    10.0
}

impl ScheduleFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| validation(format!("schedule: {e}")))?;
        if s.sweeps.is_empty() {
            return Err(validation("schedule has no sweeps"));
        }
        let mut names: Vec<&str> = s.sweeps.iter().map(|w| w.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|p| p[0] == p[1]) {
            return Err(validation("sweep names must be unique"));
        }
        for w in &s.sweeps {
            w.schedule(1.0)?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?).map_err(|e| match e {
            BenchError::Validation(m) => validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("schedule serializes to TOML")
    }
}

impl Sweep {
    /// Core schedule with frequencies in rad/s.
    pub fn schedule(&self, omega1: f64) -> Result<SteppedSineSchedule> {
        let ratios = expand(&self.grid)?;
        let direction = if ratios.len() < 2 || ratios[1] > ratios[0] { Direction::Forward } else { Direction::Backward };
        let mut s = SteppedSineSchedule::new(ratios.iter().map(|r| r * omega1).collect(), direction);
        s.hold_periods = self.hold_periods;
        s.window_periods = self.window_periods;
        s.ramp_periods = self.ramp_mode1_periods;
        s.abort_on_failure = self.abort_on_failure;
        if let Some(j) = &self.jump {
            let after = ratios
                .iter()
                .position(|r| (r - j.after_omega_ratio).abs() <= 1e-9 * r)
                .ok_or_else(|| validation(format!("sweep `{}`: jump point is not a grid point", self.name)))?;
            let continuation = if j.continuation.is_empty() { Vec::new() } else { expand(&j.continuation)? };
            let classifier = match (j.low_branch_response_m, j.high_branch_response_m) {
                (Some(low), Some(high)) => Some(BranchClassifier { low, high }),
                (None, None) => None,
                _ => return Err(validation("jump classifier needs both branch amplitudes")),
            };
            s.jump = Some(JumpPlan {
                after,
                delta_omega: j.delta_omega_ratio * omega1,
                delta_voltage: j.delta_voltage_v,
                continuation: continuation.iter().map(|r| r * omega1).collect(),
                classifier,
            });
        }
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
[[sweeps]]
name = "up"
grid = [{ start_omega_ratio = 1.0, stop_omega_ratio = 1.2, step_omega_ratio = 0.1 }]
hold_periods = 100
window_periods = 50

[sweeps.jump]
after_omega_ratio = 1.2
delta_omega_ratio = 0.2
delta_voltage_v = 2.0
continuation = [{ start_omega_ratio = 1.45, stop_omega_ratio = 1.5, step_omega_ratio = 0.05 }]
low_branch_response_m = 1e-3
high_branch_response_m = 7e-3
"#;

    #[test]
    fn jump_schedule_maps_to_core() {
        let f = ScheduleFile::from_toml(TEXT).unwrap();
        let s = f.sweeps[0].schedule(50.0).unwrap();
        assert_eq!(s.frequencies.len(), 3);
        let j = s.jump.unwrap();
        assert_eq!(j.after, 2);
        assert!((j.delta_omega - 10.0).abs() < 1e-12);
        assert_eq!(j.continuation.len(), 2);
        assert!(j.classifier.is_some());
    }

    #[test]
    fn round_trip_and_rejections() {
        let f = ScheduleFile::from_toml(TEXT).unwrap();
        assert_eq!(ScheduleFile::from_toml(&f.to_toml()).unwrap(), f);
        assert!(ScheduleFile::from_toml(&TEXT.replace("after_omega_ratio = 1.2", "after_omega_ratio = 1.15")).is_err());
        assert!(ScheduleFile::from_toml(&TEXT.replace("window_periods = 50", "window_periods = 500")).is_err());
        assert!(ScheduleFile::from_toml("sweeps = []").is_err());
    }
}
