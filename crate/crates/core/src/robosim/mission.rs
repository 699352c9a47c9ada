use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;
use crate::vm::ExitKind;

pub const DEFAULT_TOLERANCE_M: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum MissionError {
    #[error("line {line}: expected `x y`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("a mission needs at least two waypoints")]
    TooFewWaypoints,
    #[error("tolerance must be positive")]
    BadTolerance,
}

/// Planar waypoint plan whose last waypoint is a return to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mission {
    pub name: String,
    pub waypoints: Vec<(f64, f64)>,
    pub tolerance: f64,
}

impl Mission {
    /// Closes the loop by appending the first point.
    pub fn from_points(name: impl Into<String>, points: &[(f64, f64)]) -> Result<Self, MissionError> {
        let first = *points.first().ok_or(MissionError::TooFewWaypoints)?;
        let mut waypoints = points.to_vec();
        waypoints.push(first);
        Mission::new(name, waypoints, DEFAULT_TOLERANCE_M)
    }

    pub fn new(
        name: impl Into<String>,
        waypoints: Vec<(f64, f64)>,
        tolerance: f64,
    ) -> Result<Self, MissionError> {
        if waypoints.len() < 2 {
            return Err(MissionError::TooFewWaypoints);
        }
        if tolerance.is_nan() || tolerance <= 0.0 {
            return Err(MissionError::BadTolerance);
        }
        Ok(Mission {
            name: name.into(),
            waypoints,
            tolerance,
        })
    }

    /// Mission file: one `x y` pair (metres) per line, `#` comments allowed.
    /// The first point is appended again as the final goal.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, MissionError> {
        let mut points = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || MissionError::Syntax {
                line: idx + 1,
                text: raw.to_string(),
            };
            let mut it = line.split_whitespace();
            let x: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let y: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if it.next().is_some() || !x.is_finite() || !y.is_finite() {
                return Err(bad());
            }
            points.push((x, y));
        }
        if points.len() < 2 {
            return Err(MissionError::TooFewWaypoints);
        }
        Mission::from_points(name, &points)
    }

    pub fn home(&self) -> (f64, f64) {
        self.waypoints[0]
    }

    pub fn final_waypoint(&self) -> (f64, f64) {
        *self.waypoints.last().expect("validated non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub time: SimTime,
    pub x: f64,
    pub y: f64,
}

/// True (noise-free) robot path of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub reached: Vec<bool>,
    /// Set when the controller halted with every waypoint reached and the
    /// robot within tolerance of the final waypoint.
    pub completion_time: Option<f64>,
    pub end_time: f64,
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

impl Trajectory {
    /// Derives `reached` and the completion time from the samples.
    pub fn from_samples(samples: Vec<TrajectorySample>, mission: &Mission, exit: ExitKind) -> Self {
        let reached = mission
            .waypoints
            .iter()
            .map(|&wp| min_distance(&samples, wp) <= mission.tolerance)
            .collect::<Vec<_>>();
        let end_time = samples.last().map(|s| s.time.as_secs_f64()).unwrap_or(0.0);
        let final_ok = samples
            .last()
            .map(|s| dist((s.x, s.y), mission.final_waypoint()) <= mission.tolerance)
            .unwrap_or(false);
        let completion_time = (exit == ExitKind::Halted && final_ok && reached.iter().all(|&r| r))
            .then_some(end_time);
        Trajectory {
            samples,
            reached,
            completion_time,
            end_time,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{}", s.time.as_secs_f64(), s.x, s.y);
        }
        out
    }
}

fn min_distance(samples: &[TrajectorySample], wp: (f64, f64)) -> f64 {
    samples
        .iter()
        .map(|s| dist((s.x, s.y), wp))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetrics {
    pub min_dist: Vec<f64>,
    pub sum: f64,
    pub mean: f64,
    pub final_dist: f64,
    pub reached_all: bool,
    pub completion_time: Option<f64>,
}

/// Per-waypoint closest approach and summary statistics. `None` for an
/// empty trajectory.
pub fn trajectory_metrics(trajectory: &Trajectory, mission: &Mission) -> Option<TrajectoryMetrics> {
    let last = trajectory.samples.last()?;
    let min_dist: Vec<f64> = mission
        .waypoints
        .iter()
        .map(|&wp| min_distance(&trajectory.samples, wp))
        .collect();
    let sum: f64 = min_dist.iter().sum();
    let mean = sum / min_dist.len() as f64;
    let reached_all = min_dist.iter().all(|&d| d <= mission.tolerance);
    Some(TrajectoryMetrics {
        final_dist: dist((last.x, last.y), mission.final_waypoint()),
        min_dist,
        sum,
        mean,
        reached_all,
        completion_time: if reached_all { trajectory.completion_time } else { None },
    })
}

/// A run counts as crashed when it did not halt normally or ended farther
/// than the tolerance from the final waypoint.
pub fn is_crash(trajectory: &Trajectory, exit: ExitKind, mission: &Mission) -> bool {
    if exit != ExitKind::Halted {
        return true;
    }
    match trajectory.samples.last() {
        Some(s) => dist((s.x, s.y), mission.final_waypoint()) > mission.tolerance,
        None => true,
    }
}

/// Fraction of crashed runs; `None` when `runs` is empty.
pub fn crash_rate(runs: &[(Trajectory, ExitKind)], mission: &Mission) -> Option<f64> {
    if runs.is_empty() {
        return None;
    }
    let crashed = runs
        .iter()
        .filter(|(t, e)| is_crash(t, *e, mission))
        .count();
    Some(crashed as f64 / runs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64, x: f64, y: f64) -> TrajectorySample {
        TrajectorySample {
            time: SimTime::from_secs_f64(t).unwrap(),
            x,
            y,
        }
    }

    fn square() -> Mission {
        Mission::from_points("sq", &[(0.0, 0.0), (5.0, 0.0)]).unwrap()
    }

    #[test]
    fn parse_closes_the_loop() {
        let m = Mission::parse("m", "# comment\n0 0\n5 0\n\n").unwrap();
        assert_eq!(m.waypoints, vec![(0.0, 0.0), (5.0, 0.0), (0.0, 0.0)]);
        assert_eq!(m.tolerance, 1.0);
        assert!(Mission::parse("m", "0 0\n").is_err());
        assert!(matches!(Mission::parse("m", "0 0\n1\n"), Err(MissionError::Syntax { line: 2, .. })));
    }

    #[test]
    fn exact_visit_has_zero_distances() {
        let m = square();
        let t = Trajectory::from_samples(
            vec![sample(0.0, 0.0, 0.0), sample(1.0, 5.0, 0.0), sample(2.0, 0.0, 0.0)],
            &m,
            ExitKind::Halted,
        );
        let metrics = trajectory_metrics(&t, &m).unwrap();
        assert_eq!(metrics.min_dist, vec![0.0, 0.0, 0.0]);
        assert_eq!(metrics.mean, 0.0);
        assert!(metrics.reached_all);
        assert_eq!(metrics.completion_time, Some(2.0));
    }

    #[test]
    fn nearest_sample_distance() {
        let m = Mission::new("one", vec![(0.0, 0.0), (9.0, 9.0)], 1.0).unwrap();
        let t = Trajectory::from_samples(vec![sample(0.0, 0.0, 1.0), sample(1.0, 0.0, 3.0)], &m, ExitKind::Halted);
        let metrics = trajectory_metrics(&t, &m).unwrap();
        assert_eq!(metrics.min_dist[0], 1.0);
        assert!(!metrics.reached_all);
        assert_eq!(metrics.completion_time, None);
    }

    #[test]
    fn crash_rates() {
        let m = square();
        let good = Trajectory::from_samples(
            vec![sample(0.0, 0.0, 0.0), sample(1.0, 5.0, 0.0), sample(2.0, 0.2, 0.0)],
            &m,
            ExitKind::Halted,
        );
        let all_good = vec![(good.clone(), ExitKind::Halted); 4];
        assert_eq!(crash_rate(&all_good, &m), Some(0.0));
        let all_timeout = vec![(good.clone(), ExitKind::TimedOut); 4];
        assert_eq!(crash_rate(&all_timeout, &m), Some(1.0));
        let mut mixed = vec![(good.clone(), ExitKind::Halted); 7];
        mixed.extend(vec![(good, ExitKind::TimedOut); 3]);
        assert_eq!(crash_rate(&mixed, &m), Some(0.3));
        assert_eq!(crash_rate(&[], &m), None);
    }
}
