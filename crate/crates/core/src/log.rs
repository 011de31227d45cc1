//! The trajectory log: everything a run leaves behind, and the sole input
//! to the metrics. Snapshots are taken once per tick with robots in id
//! order, so identical runs serialize to identical bytes.

use crate::fields::{CircularObstacle, WallGap};
use crate::geometry::Vec2;
use crate::negotiation::{PriorityAssignment, TranscriptEntry};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const LOG_FORMAT_VERSION: u32 = 1;

/// One robot at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSnap {
    pub id: String,
    pub position: Vec2,
    pub velocity: Vec2,
    pub heading: f64,
    pub priority: f64,
    pub arrived: bool,
}

/// The world at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub robots: Vec<RobotSnap>,
    /// Unordered pairs with a dialogue in flight.
    pub active_sessions: Vec<(String, String)>,
}

/// A resolved negotiation, as evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub pair: (String, String),
    pub opened_at: f64,
    pub resolved_at: f64,
    /// "scripted" or "llm".
    pub mode: String,
    pub transcript: Vec<TranscriptEntry>,
    pub outcome: PriorityAssignment,
    pub fell_back: bool,
}

/// Static facts about one robot, echoed from the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotMeta {
    pub id: String,
    pub start: Vec2,
    pub goal: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub format_version: u32,
    pub scenario_name: String,
    /// FNV-1a digest of the canonical scenario JSON.
    pub scenario_digest: String,
    pub planner: String,
    pub negotiator: String,
    pub seed: u64,
    pub dt: f64,
    pub max_time: f64,
    pub goal_tolerance: f64,
    pub safe_distance: f64,
    pub arena_radius: f64,
    pub obstacles: Vec<CircularObstacle>,
    pub gap: Option<WallGap>,
    pub robots: Vec<RobotMeta>,
    pub snapshots: Vec<Snapshot>,
    /// Arrival time per robot that reached its goal.
    pub arrivals: BTreeMap<String, f64>,
    /// Robots still under way when the clock ran out.
    pub timed_out: Vec<String>,
    pub negotiations: Vec<SessionRecord>,
    pub final_priorities: BTreeMap<String, f64>,
}

impl TrajectoryLog {
    /// Arrival time for metrics purposes: timeouts count as `max_time`.
    pub fn arrival_or_timeout(&self, id: &str) -> f64 {
        self.arrivals.get(id).copied().unwrap_or(self.max_time)
    }

    pub fn robot_ids(&self) -> impl Iterator<Item = &str> {
        self.robots.iter().map(|r| r.id.as_str())
    }

    /// Did this robot ever move to its goal's side of the wall line?
    pub fn crossed_wall(&self, id: &str) -> bool {
        let Some(gap) = &self.gap else {
            return false;
        };
        let Some(meta) = self.robots.iter().find(|r| r.id == id) else {
            return false;
        };
        let start_side = (meta.start.x - gap.wall_x).signum();
        self.snapshots.iter().any(|snap| {
            snap.robots
                .iter()
                .find(|r| r.id == id)
                .map(|r| {
                    let side = (r.position.x - gap.wall_x).signum();
                    side != 0.0 && side != start_side
                })
                .unwrap_or(false)
        })
    }

    /// Minimum pairwise separation over the whole run, among robots not yet
    /// arrived at each instant. `None` when no instant had two active
    /// robots.
    pub fn min_pairwise_separation(&self) -> Option<f64> {
        let mut min_sep: Option<f64> = None;
        for snap in &self.snapshots {
            let active: Vec<&RobotSnap> = snap.robots.iter().filter(|r| !r.arrived).collect();
            for (i, a) in active.iter().enumerate() {
                for b in active.iter().skip(i + 1) {
                    let d = a.position.distance(b.position);
                    min_sep = Some(min_sep.map_or(d, |m: f64| m.min(d)));
                }
            }
        }
        min_sep
    }
}
