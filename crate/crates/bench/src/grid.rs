//! Frequency grids in units of the first natural frequency.
//!
//! Textual form: comma-separated `start:stop:step` segments, e.g.
//! `0.9:1.1:0.02,1.1:1.3:0.005`. A segment with `start > stop` runs
//! downwards; `step` is always a positive magnitude.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSegment {
    pub start_omega_ratio: f64,
    pub stop_omega_ratio: f64,
    pub step_omega_ratio: f64,
}

impl GridSegment {
    fn validate(&self) -> Result<()> {
        let v = [self.start_omega_ratio, self.stop_omega_ratio, self.step_omega_ratio];
        if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(validation("grid bounds and step must be finite and positive"));
        }
        Ok(())
    }

    /// Points from start to stop inclusive; the last step may be shorter.
    fn points(&self) -> Vec<f64> {
        let (a, b, h) = (self.start_omega_ratio, self.stop_omega_ratio, self.step_omega_ratio);
        let sign = if b >= a { 1.0 } else { -1.0 };
        let n = ((b - a).abs() / h + 1e-9).floor() as usize;
        let mut out: Vec<f64> = (0..=n).map(|k| a + sign * h * k as f64).collect();
        let last = *out.last().expect("at least the start point");
        if (last - b).abs() > 1e-9 * b {
            out.push(b);
        } else {
            *out.last_mut().expect("non-empty") = b;
        }
        out
    }
}

pub fn parse_grid(spec: &str) -> Result<Vec<GridSegment>> {
    let mut segments = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        if fields.len() != 3 {
            return Err(validation(format!("grid segment `{part}` is not start:stop:step")));
        }
        let num = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| validation(format!("`{s}` in grid segment `{part}` is not a number")))
        };
        let seg = GridSegment {
            start_omega_ratio: num(fields[0])?,
            stop_omega_ratio: num(fields[1])?,
            step_omega_ratio: num(fields[2])?,
        };
        seg.validate()?;
        segments.push(seg);
    }
    if segments.is_empty() {
        return Err(validation("empty grid specification"));
    }
    Ok(segments)
}

pub fn format_grid(segments: &[GridSegment]) -> String {
    segments
        .iter()
        .map(|s| format!("{}:{}:{}", s.start_omega_ratio, s.stop_omega_ratio, s.step_omega_ratio))
        .collect::<Vec<_>>()
        .join(",")
}

/// Concatenated grid (ratios to `ω_1`), with points shared by adjacent
/// segments kept once. The result must be strictly monotone.
pub fn expand(segments: &[GridSegment]) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::new();
    for seg in segments {
        seg.validate()?;
        for r in seg.points() {
            if out.last().is_some_and(|l| (l - r).abs() <= 1e-9 * r) {
                continue;
            }
            out.push(r);
        }
    }
    if out.is_empty() {
        return Err(validation("grid has no points"));
    }
    let up = out.windows(2).all(|p| p[1] > p[0]);
    let down = out.windows(2).all(|p| p[1] < p[0]);
    if !(up || down) {
        return Err(validation("grid segments do not form a monotone sequence"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_join_without_duplicates() {
        let g = expand(&parse_grid("0.9:1.1:0.1, 1.1:1.2:0.05").unwrap()).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[2] - 1.1).abs() < 1e-12 && (g[4] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn descending_and_ragged_segments() {
        let g = expand(&parse_grid("1.4:1.3:0.03").unwrap()).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.3);
        assert!(g.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn malformed_specs_are_rejected() {
        for bad in ["", "1:2", "1:2:0", "a:2:0.1", "1:2:-0.1"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
        assert!(expand(&parse_grid("1:2:0.5,1.5:1:0.1").unwrap()).is_err());
    }

    #[test]
    fn format_round_trip() {
        let s = parse_grid("0.5:8:0.005").unwrap();
        assert_eq!(parse_grid(&format_grid(&s)).unwrap(), s);
    }
}
