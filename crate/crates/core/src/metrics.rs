//! Evaluation quantities computed from a trajectory log: time to goal,
//! mean minimum distance, flow rate through a gap, and the
//! priority-vs-arrival fairness check.

use crate::fields::WallGap;
use crate::log::TrajectoryLog;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Priorities within this of each other may arrive in either order.
pub const FAIRNESS_TIE_EPS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("metric needs at least two robots")]
    TooFewRobots,
    #[error("makespan is zero; no robot moved")]
    ZeroMakespan,
    #[error("run incomplete: {0} robot(s) timed out")]
    Incomplete(usize),
}

/// Everything the evaluation reports for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ttg_per_robot: BTreeMap<String, f64>,
    pub ttg_mean: f64,
    /// Mean over time of the minimum pairwise robot separation (m);
    /// absent for single-robot runs.
    pub mmd_robot: Option<f64>,
    /// Same statistic against obstacle boundaries, when obstacles exist.
    pub mmd_obstacle: Option<f64>,
    /// Agents per meter of gap per second of makespan; present iff the
    /// scenario has a gap.
    pub flow_rate: Option<f64>,
    /// Arrival order matches final priority order; absent when any robot
    /// timed out.
    pub fairness_match: Option<bool>,
    pub timeout_ids: Vec<String>,
}

/// Per-robot time to goal and its mean. Timeouts count as `max_time`, so
/// deadlocking planners produce finite, comparable numbers.
pub fn ttg(log: &TrajectoryLog) -> (BTreeMap<String, f64>, f64) {
    let per_robot: BTreeMap<String, f64> = log
        .robot_ids()
        .map(|id| (id.to_string(), log.arrival_or_timeout(id)))
        .collect();
    let mean = per_robot.values().sum::<f64>() / per_robot.len().max(1) as f64;
    (per_robot, mean)
}

/// Mean over timesteps of the minimum pairwise separation among robots
/// still under way; steps with fewer than two active robots are excluded.
pub fn mmd(log: &TrajectoryLog) -> Result<f64, MetricsError> {
    if log.robots.len() < 2 {
        return Err(MetricsError::TooFewRobots);
    }
    let mut samples = 0usize;
    let mut total = 0.0;
    for snap in &log.snapshots {
        let active: Vec<_> = snap.robots.iter().filter(|r| !r.arrived).collect();
        if active.len() < 2 {
            continue;
        }
        let mut min_sep = f64::INFINITY;
        for (i, a) in active.iter().enumerate() {
            for b in active.iter().skip(i + 1) {
                min_sep = min_sep.min(a.position.distance(b.position));
            }
        }
        total += min_sep;
        samples += 1;
    }
    if samples == 0 {
        // Two robots that both start on their goals never co-move.
        return Err(MetricsError::TooFewRobots);
    }
    Ok(total / samples as f64)
}

/// Mean over timesteps of the minimum distance from any active robot to
/// the nearest obstacle boundary; `None` without obstacles.
pub fn mmd_obstacle(log: &TrajectoryLog) -> Option<f64> {
    if log.obstacles.is_empty() {
        return None;
    }
    let mut samples = 0usize;
    let mut total = 0.0;
    for snap in &log.snapshots {
        let mut min_d = f64::INFINITY;
        let mut any = false;
        for r in snap.robots.iter().filter(|r| !r.arrived) {
            for obs in &log.obstacles {
                min_d = min_d.min(obs.boundary_distance(r.position));
                any = true;
            }
        }
        if any {
            total += min_d;
            samples += 1;
        }
    }
    (samples > 0).then(|| total / samples as f64)
}

/// Flow rate `N / (z·T)`: wall-crossers per meter of gap width per second
/// of makespan (the last arrival-or-timeout time).
pub fn flow_rate(log: &TrajectoryLog, gap: &WallGap) -> Result<f64, MetricsError> {
    let makespan = log
        .robot_ids()
        .map(|id| log.arrival_or_timeout(id))
        .fold(0.0f64, f64::max);
    if makespan <= 0.0 {
        return Err(MetricsError::ZeroMakespan);
    }
    let crossers = log.robot_ids().filter(|id| log.crossed_wall(id)).count();
    Ok(crossers as f64 / (gap.gap_width * makespan))
}

/// True when sorting by final priority (descending) and by arrival time
/// (ascending) agree; priorities within [`FAIRNESS_TIE_EPS`] of each other
/// may arrive in either order. Errors when any robot timed out.
pub fn fairness_match(log: &TrajectoryLog) -> Result<bool, MetricsError> {
    if !log.timed_out.is_empty() {
        return Err(MetricsError::Incomplete(log.timed_out.len()));
    }
    let ids: Vec<&str> = log.robot_ids().collect();
    for (i, a) in ids.iter().enumerate() {
        for b in ids.iter().skip(i + 1) {
            let (rho_a, rho_b) = (log.final_priorities[*a], log.final_priorities[*b]);
            let (t_a, t_b) = (log.arrivals[*a], log.arrivals[*b]);
            if rho_a > rho_b + FAIRNESS_TIE_EPS && t_a > t_b {
                return Ok(false);
            }
            if rho_b > rho_a + FAIRNESS_TIE_EPS && t_b > t_a {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Assemble the full report for one log.
pub fn report(log: &TrajectoryLog) -> MetricsReport {
    let (ttg_per_robot, ttg_mean) = ttg(log);
    MetricsReport {
        ttg_per_robot,
        ttg_mean,
        mmd_robot: mmd(log).ok(),
        mmd_obstacle: mmd_obstacle(log),
        flow_rate: log.gap.as_ref().and_then(|g| flow_rate(log, g).ok()),
        fairness_match: fairness_match(log).ok(),
        timeout_ids: log.timed_out.clone(),
    }
}
