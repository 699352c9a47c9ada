//! Nominal versus delayed mission comparisons.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::delay::DelayConfig;
use super::mission::{is_crash, trajectory_metrics, Mission};
use super::world::{run_mission, MissionConfig, MissionRunError, WorldConfig};
use crate::time::SimTime;
use crate::vm::{ExitKind, Program};

/// One execution's outcome as used by the lab tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabRun {
    pub seed: u64,
    pub exit: ExitKind,
    pub min_dist: Vec<f64>,
    pub mean_min_dist: f64,
    pub reached_all: bool,
    pub crashed: bool,
    pub end_time: f64,
}

/// All runs of one mission under one delay setting (`None` = nominal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabCell {
    pub mission: String,
    pub delay: Option<DelayConfig>,
    pub runs: Vec<LabRun>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

impl LabCell {
    pub fn waypoint_means(&self) -> Vec<f64> {
        self.per_waypoint(mean)
    }

    pub fn waypoint_stds(&self) -> Vec<f64> {
        self.per_waypoint(std_dev)
    }

    fn per_waypoint(&self, f: fn(&[f64]) -> f64) -> Vec<f64> {
        let n_wp = self.runs.first().map(|r| r.min_dist.len()).unwrap_or(0);
        (0..n_wp)
            .map(|w| f(&self.runs.iter().map(|r| r.min_dist[w]).collect::<Vec<_>>()))
            .collect()
    }

    /// Mean over runs of the per-run mean waypoint distance.
    pub fn mean_min_dist(&self) -> f64 {
        mean(&self.runs.iter().map(|r| r.mean_min_dist).collect::<Vec<_>>())
    }

    pub fn crash_rate(&self) -> f64 {
        if self.runs.is_empty() {
            return 0.0;
        }
        self.runs.iter().filter(|r| r.crashed).count() as f64 / self.runs.len() as f64
    }

    /// Mean end time of runs that did / did not reach every waypoint, with
    /// their counts.
    pub fn times(&self) -> ((f64, usize), (f64, usize)) {
        let split = |reached: bool| {
            let v: Vec<f64> = self
                .runs
                .iter()
                .filter(|r| r.reached_all == reached)
                .map(|r| r.end_time)
                .collect();
            (mean(&v), v.len())
        };
        (split(true), split(false))
    }

    pub fn label(&self) -> String {
        match &self.delay {
            None => "nominal".into(),
            Some(DelayConfig::TopicIntercept { topic, delay }) => format!("{topic}@{delay}"),
            Some(DelayConfig::SleepInsertion { weight, delay, .. }) => {
                format!("sleep@{delay}w{weight}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabReport {
    pub seeds: Vec<u64>,
    pub cells: Vec<LabCell>,
}

/// Runs every mission nominally and under each delay, once per seed. The
/// world seed is shared between settings so only the delay differs.
pub fn delay_lab(
    program: &Program,
    missions: &[Mission],
    delays: &[DelayConfig],
    seeds: &[u64],
    world: WorldConfig,
) -> Result<LabReport, MissionRunError> {
    for d in delays {
        d.validate()?;
    }
    let settings: Vec<Option<DelayConfig>> = std::iter::once(None)
        .chain(delays.iter().cloned().map(Some))
        .collect();
    let jobs: Vec<(usize, usize, u64)> = (0..missions.len())
        .flat_map(|m| {
            (0..settings.len()).flat_map(move |s| seeds.iter().map(move |&seed| (m, s, seed)))
        })
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(m, s, seed)| -> Result<LabRun, MissionRunError> {
            let mission = &missions[m];
            let config = MissionConfig {
                delay: settings[s].clone(),
                world,
                ..MissionConfig::new(seed)
            };
            let run = run_mission(program, mission, &config)?;
            let metrics = trajectory_metrics(&run.trajectory, mission);
            let (min_dist, mean_min_dist, reached_all) = match metrics {
                Some(m) => (m.min_dist, m.mean, m.reached_all),
                None => (vec![f64::NAN; mission.waypoints.len()], f64::NAN, false),
            };
            Ok(LabRun {
                seed,
                exit: run.exit,
                min_dist,
                mean_min_dist,
                reached_all,
                crashed: is_crash(&run.trajectory, run.exit, mission),
                end_time: run.trajectory.end_time,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut it = runs.into_iter();
    let mut cells = Vec::new();
    for mission in missions {
        for setting in &settings {
            cells.push(LabCell {
                mission: mission.name.clone(),
                delay: setting.clone(),
                runs: it.by_ref().take(seeds.len()).collect(),
            });
        }
    }
    Ok(LabReport {
        seeds: seeds.to_vec(),
        cells,
    })
}

/// `P(X >= wins)` for `X ~ Binomial(trials, 1/2)`.
pub fn sign_test_p(wins: usize, trials: usize) -> f64 {
    let mut coef = 1.0f64;
    let mut tail = 0.0;
    for k in 0..=trials {
        if k >= wins {
            tail += coef;
        }
        coef = coef * (trials - k) as f64 / (k + 1) as f64;
    }
    tail / 2f64.powi(trials as i32)
}

impl LabReport {
    pub fn cell(&self, mission: &str, delay: Option<&DelayConfig>) -> Option<&LabCell> {
        self.cells
            .iter()
            .find(|c| c.mission == mission && c.delay.as_ref() == delay)
    }

    /// For each seed, the mean per-waypoint distance pooled over every
    /// mission, for the given setting.
    pub fn pooled_by_seed(&self, delay: Option<&DelayConfig>) -> Vec<f64> {
        self.seeds
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let v: Vec<f64> = self
                    .cells
                    .iter()
                    .filter(|c| c.delay.as_ref() == delay)
                    .flat_map(|c| c.runs[i].min_dist.iter().copied())
                    .collect();
                mean(&v)
            })
            .collect()
    }

    /// Paired comparison of `delay` against nominal over seeds, pooling all
    /// missions: `(nominal mean, delayed mean, seeds where delayed is
    /// larger, one-sided sign-test p)`.
    pub fn compare(&self, delay: &DelayConfig) -> (f64, f64, usize, f64) {
        let nominal = self.pooled_by_seed(None);
        let delayed = self.pooled_by_seed(Some(delay));
        let wins = nominal
            .iter()
            .zip(&delayed)
            .filter(|(n, d)| d > n)
            .count();
        (mean(&nominal), mean(&delayed), wins, sign_test_p(wins, nominal.len()))
    }

    pub fn distance_text(&self) -> String {
        let mut out = String::from("Mean minimum distance from each waypoint (m)\n");
        self.table(&mut out, LabCell::waypoint_means);
        out.push_str("\nStandard deviation of minimum distance from each waypoint (m)\n");
        self.table(&mut out, LabCell::waypoint_stds);
        out
    }

    fn table(&self, out: &mut String, f: fn(&LabCell) -> Vec<f64>) {
        for c in &self.cells {
            let v = f(c);
            let _ = write!(out, "{:<4} {:<22}", c.mission, c.label());
            for x in &v {
                let _ = write!(out, " {:>6.3}", x);
            }
            let _ = writeln!(out, " | total {:>7.3} mean {:>6.3}", v.iter().sum::<f64>(), mean(&v));
        }
    }

    pub fn outcome_text(&self) -> String {
        let mut out = format!(
            "{:<4} {:<22} {:>6} {:>7} {:>9} {:>4} {:>9} {:>4}\n",
            "", "setting", "runs", "crash", "t_reach", "n", "t_miss", "n"
        );
        for c in &self.cells {
            let ((tr, nr), (tm, nm)) = c.times();
            let _ = writeln!(
                out,
                "{:<4} {:<22} {:>6} {:>7.3} {:>9.2} {:>4} {:>9.2} {:>4}",
                c.mission,
                c.label(),
                c.runs.len(),
                c.crash_rate(),
                tr,
                nr,
                tm,
                nm
            );
        }
        out
    }

    /// One row per cell and waypoint.
    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "mission", "setting", "waypoint", "runs", "mean_min_dist", "std_min_dist",
            "crash_rate", "mean_time_reached", "n_reached", "mean_time_not_reached",
            "n_not_reached",
        ])
        .expect("in-memory write");
        for c in &self.cells {
            let ((tr, nr), (tm, nm)) = c.times();
            for (wp, (m, s)) in c.waypoint_means().iter().zip(c.waypoint_stds()).enumerate() {
                w.write_record([
                    c.mission.clone(),
                    c.label(),
                    wp.to_string(),
                    c.runs.len().to_string(),
                    m.to_string(),
                    s.to_string(),
                    c.crash_rate().to_string(),
                    tr.to_string(),
                    nr.to_string(),
                    tm.to_string(),
                    nm.to_string(),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
    }
}

/// Intercepts of `topic` at each delay.
pub fn intercepts(topic: &str, delays: &[SimTime]) -> Vec<DelayConfig> {
    delays
        .iter()
        .map(|&d| DelayConfig::intercept(topic, d))
        .collect()
}
