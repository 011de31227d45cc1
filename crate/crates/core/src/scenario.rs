//! Run setup: arena geometry, robots, events, planner/negotiator selection,
//! and the canonical circle-arc scenario generator.

use crate::baselines::{ClassicalApfParams, MpcParams};
use crate::fields::{CircularObstacle, FieldParams, WallGap};
use crate::geometry::Vec2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    #[default]
    Faca,
    ClassicalApf,
    Mpc,
}

impl PlannerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::Faca => "faca",
            PlannerKind::ClassicalApf => "classical_apf",
            PlannerKind::Mpc => "mpc",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "faca" => Ok(PlannerKind::Faca),
            "classical_apf" => Ok(PlannerKind::ClassicalApf),
            "mpc" => Ok(PlannerKind::Mpc),
            other => Err(format!("unknown planner `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegotiatorKind {
    /// No communication: priorities stay private, no right-of-way forms.
    None,
    /// The deterministic rule stands in for the dialogue.
    #[default]
    Scripted,
    /// Dialogue through an external chat service.
    Llm,
}

impl NegotiatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NegotiatorKind::None => "none",
            NegotiatorKind::Scripted => "scripted",
            NegotiatorKind::Llm => "llm",
        }
    }
}

impl std::str::FromStr for NegotiatorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(NegotiatorKind::None),
            "scripted" => Ok(NegotiatorKind::Scripted),
            "llm" => Ok(NegotiatorKind::Llm),
            other => Err(format!("unknown negotiator `{other}`")),
        }
    }
}

/// Initial state of one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub id: String,
    pub start: Vec2,
    pub goal: Vec2,
    pub priority: f64,
    pub v_max: f64,
    pub mission: String,
    #[serde(default)]
    pub urgency: Option<String>,
}

/// A scheduled wholesale priority change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityEvent {
    pub at_time: f64,
    pub new_priorities: BTreeMap<String, f64>,
}

/// Everything a run needs. Serialized as JSON; see `formats`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub format_version: u32,
    pub name: String,
    pub arena_radius: f64,
    pub dt: f64,
    pub max_time: f64,
    pub goal_tolerance: f64,
    pub safe_distance: f64,
    pub planner: PlannerKind,
    pub negotiator: NegotiatorKind,
    pub seed: u64,
    pub robots: Vec<RobotSpec>,
    #[serde(default)]
    pub obstacles: Vec<CircularObstacle>,
    #[serde(default)]
    pub gap: Option<WallGap>,
    #[serde(default)]
    pub priority_events: Vec<PriorityEvent>,
    #[serde(default)]
    pub field_params: FieldParams,
    #[serde(default)]
    pub apf_params: ClassicalApfParams,
    #[serde(default)]
    pub mpc_params: MpcParams,
    /// Lookahead of the collision trigger (s).
    #[serde(default = "default_prediction_horizon")]
    pub prediction_horizon: f64,
    /// Round limit per dialogue session.
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    /// Quiet period before a resolved pair may renegotiate (s).
    #[serde(default = "default_cooldown")]
    pub negotiation_cooldown: f64,
    /// When set, [`Scenario::with_seed`] redraws priorities and permutation
    /// events from the new seed; otherwise only the sampling streams change.
    #[serde(default)]
    pub reseed_priorities: bool,
}

fn default_prediction_horizon() -> f64 {
    5.0
}
fn default_max_rounds() -> usize {
    6
}
fn default_cooldown() -> f64 {
    2.0
}

impl Scenario {
    /// The per-seed variant of this scenario: with `reseed_priorities` the
    /// robot priorities are redrawn from Normal(3, 1) truncated below 0.5
    /// and every priority event becomes a fresh permutation of them, all
    /// from the given seed; geometry and parameters stay fixed.
    pub fn with_seed(&self, seed: u64) -> Scenario {
        let mut scenario = self.clone();
        scenario.seed = seed;
        if !self.reseed_priorities {
            return scenario;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(3.0, 1.0).expect("valid normal");
        let mut order: Vec<usize> = (0..scenario.robots.len()).collect();
        order.sort_by(|&a, &b| scenario.robots[a].id.cmp(&scenario.robots[b].id));
        for &idx in &order {
            scenario.robots[idx].priority = loop {
                let rho: f64 = normal.sample(&mut rng);
                if rho >= 0.5 {
                    break rho;
                }
            };
        }
        let values: Vec<f64> = order
            .iter()
            .map(|&idx| scenario.robots[idx].priority)
            .collect();
        for event in &mut scenario.priority_events {
            let mut shuffled: Vec<usize> = (0..values.len()).collect();
            shuffled.shuffle(&mut rng);
            event.new_priorities = order
                .iter()
                .enumerate()
                .map(|(k, &idx)| (scenario.robots[idx].id.clone(), values[shuffled[k]]))
                .collect();
        }
        scenario
    }

    /// Field-by-field validation; failures name the offending field.
    // Negated comparisons so NaN fails validation too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.format_version != SCENARIO_FORMAT_VERSION {
            return Err(invalid(
                "format_version",
                format!("expected {SCENARIO_FORMAT_VERSION}"),
            ));
        }
        if !(self.dt > 0.0) {
            return Err(invalid("dt", "must be > 0"));
        }
        if !(self.max_time > 0.0) {
            return Err(invalid("max_time", "must be > 0"));
        }
        if !(self.arena_radius > 0.0) {
            return Err(invalid("arena_radius", "must be > 0"));
        }
        if !(self.goal_tolerance > 0.0) {
            return Err(invalid("goal_tolerance", "must be > 0"));
        }
        if !(self.safe_distance > 0.0) {
            return Err(invalid("safe_distance", "must be > 0"));
        }
        if !(self.prediction_horizon > 0.0) {
            return Err(invalid("prediction_horizon", "must be > 0"));
        }
        if self.robots.is_empty() {
            return Err(invalid("robots", "at least one robot required"));
        }
        self.field_params
            .validate()
            .map_err(|e| invalid("field_params", e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        for r in &self.robots {
            if !seen.insert(r.id.clone()) {
                return Err(invalid("robots", format!("duplicate id `{}`", r.id)));
            }
            if !(r.priority > 0.0) {
                return Err(invalid("robots", format!("`{}` priority must be > 0", r.id)));
            }
            if !(r.v_max > 0.0) {
                return Err(invalid("robots", format!("`{}` v_max must be > 0", r.id)));
            }
            if !r.start.is_finite() || !r.goal.is_finite() {
                return Err(invalid("robots", format!("`{}` has non-finite geometry", r.id)));
            }
        }
        for (a_idx, a) in self.robots.iter().enumerate() {
            for b in self.robots.iter().skip(a_idx + 1) {
                if a.start.distance(b.start) < self.safe_distance {
                    return Err(invalid(
                        "robots",
                        format!("`{}` and `{}` start closer than safe_distance", a.id, b.id),
                    ));
                }
            }
        }
        for obs in &self.obstacles {
            if !(obs.radius > 0.0) {
                return Err(invalid("obstacles", "radius must be > 0"));
            }
            for r in &self.robots {
                if r.start.distance(obs.center) <= obs.radius {
                    return Err(invalid(
                        "obstacles",
                        format!("robot `{}` starts inside an obstacle", r.id),
                    ));
                }
            }
        }
        if let Some(g) = &self.gap {
            if !(g.gap_width > 0.0) {
                return Err(invalid("gap", "gap_width must be > 0"));
            }
            if g.gap_center.x != g.wall_x {
                return Err(invalid("gap", "gap_center must lie on the wall line"));
            }
        }
        for (k, ev) in self.priority_events.iter().enumerate() {
            if ev.at_time < 0.0 {
                return Err(invalid("priority_events", format!("event {k} at_time < 0")));
            }
            for (id, rho) in &ev.new_priorities {
                if !self.robots.iter().any(|r| &r.id == id) {
                    return Err(invalid(
                        "priority_events",
                        format!("event {k} references unknown robot `{id}`"),
                    ));
                }
                if !(rho > &0.0) {
                    return Err(invalid(
                        "priority_events",
                        format!("event {k} priority for `{id}` must be > 0"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Knobs of [`make_circle_scenario`] beyond the positional arguments.
#[derive(Debug, Clone)]
pub struct CircleOptions {
    pub planner: PlannerKind,
    pub negotiator: NegotiatorKind,
    /// Two walls at x = 0 with this opening, centered on the origin.
    pub gap_width: Option<f64>,
    /// A circular obstacle of this radius at the origin.
    pub obstacle_radius: Option<f64>,
    /// Give every robot this priority instead of drawing from the normal.
    pub equal_priorities: Option<f64>,
    /// Schedule a seed-drawn priority permutation at `max_time / 2`.
    pub priority_event: bool,
    pub dt: f64,
    pub max_time: f64,
    pub v_max: f64,
    pub goal_tolerance: f64,
    pub safe_distance: f64,
}

impl Default for CircleOptions {
    fn default() -> Self {
        CircleOptions {
            planner: PlannerKind::Faca,
            negotiator: NegotiatorKind::Scripted,
            gap_width: None,
            obstacle_radius: None,
            equal_priorities: None,
            priority_event: true,
            dt: 0.05,
            max_time: 60.0,
            v_max: 15.0,
            goal_tolerance: 0.5,
            safe_distance: 1.0,
        }
    }
}

const MISSIONS: [&str; 8] = [
    "transporting a critical patient to City General Hospital",
    "delivering a ventilator for emergency surgery",
    "carrying trauma kits to the forward triage post",
    "delivering food rations to the displaced-persons shelter",
    "surveying structural damage along the evacuation route",
    "relaying a portable communications hub to sector command",
    "mapping safe corridors through the debris field",
    "hauling water purification units to the aid station",
];

/// Build the standard evaluation scenario: `n` robots evenly spaced on an
/// `arc`-radian arc of the arena circle (centered on the +x axis), each
/// with its goal antipodal to its start; priorities drawn from
/// Normal(3, 1) truncated below 0.5; optionally one seed-drawn priority
/// permutation at `max_time / 2`.
pub fn make_circle_scenario(
    n: usize,
    arena_radius: f64,
    arc: f64,
    priority_seed: u64,
    options: &CircleOptions,
) -> Scenario {
    assert!(n >= 1, "need at least one robot");
    let mut rng = ChaCha8Rng::seed_from_u64(priority_seed);
    let normal = Normal::new(3.0, 1.0).expect("valid normal");
    let mut draw_priority = || loop {
        let rho: f64 = normal.sample(&mut rng);
        if rho >= 0.5 {
            return rho;
        }
    };

    let mut robots = Vec::with_capacity(n);
    for k in 0..n {
        let angle = if n == 1 {
            0.0
        } else {
            -arc / 2.0 + arc * k as f64 / (n - 1) as f64
        };
        let start = Vec2::new(arena_radius * angle.cos(), arena_radius * angle.sin());
        let priority = options
            .equal_priorities
            .unwrap_or_else(&mut draw_priority);
        robots.push(RobotSpec {
            id: format!("robot_{}", k + 1),
            start,
            goal: -start,
            priority,
            v_max: options.v_max,
            mission: MISSIONS[k % MISSIONS.len()].to_string(),
            urgency: None,
        });
    }

    let mut priority_events = Vec::new();
    if options.priority_event {
        // Permute the drawn priority values among the robots.
        let values: Vec<f64> = robots.iter().map(|r| r.priority).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let new_priorities: BTreeMap<String, f64> = robots
            .iter()
            .enumerate()
            .map(|(k, r)| (r.id.clone(), values[order[k]]))
            .collect();
        priority_events.push(PriorityEvent {
            at_time: options.max_time / 2.0,
            new_priorities,
        });
    }

    let gap = options.gap_width.map(|w| WallGap {
        wall_x: 0.0,
        gap_center: Vec2::ZERO,
        gap_width: w,
    });
    let obstacles = options
        .obstacle_radius
        .map(|r| CircularObstacle {
            center: Vec2::ZERO,
            radius: r,
        })
        .into_iter()
        .collect();

    let field_params = FieldParams {
        v_max: options.v_max,
        ..FieldParams::default()
    };

    let reseed_priorities = options.equal_priorities.is_none();
    let kind = match (&gap, options.obstacle_radius) {
        (Some(_), _) => "gap",
        (None, Some(_)) => "obstacle",
        _ => "free",
    };
    Scenario {
        format_version: SCENARIO_FORMAT_VERSION,
        name: format!("circle_{kind}_n{n}"),
        arena_radius,
        dt: options.dt,
        max_time: options.max_time,
        goal_tolerance: options.goal_tolerance,
        safe_distance: options.safe_distance,
        planner: options.planner,
        negotiator: options.negotiator,
        seed: priority_seed,
        robots,
        obstacles,
        gap,
        priority_events,
        field_params,
        apf_params: ClassicalApfParams::default(),
        mpc_params: MpcParams::default(),
        prediction_horizon: default_prediction_horizon(),
        max_rounds: default_max_rounds(),
        negotiation_cooldown: default_cooldown(),
        reseed_priorities,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn circle_layout_is_antipodal_on_the_rim() {
        let s = make_circle_scenario(4, 50.0, PI / 16.0, 7, &CircleOptions::default());
        assert_eq!(s.robots.len(), 4);
        for r in &s.robots {
            assert!((r.start.norm() - 50.0).abs() <= 1e-9);
            assert!((r.goal + r.start).norm() <= 1e-9);
        }
        s.validate().unwrap();
    }

    #[test]
    fn gap_option_places_walls_at_x_zero() {
        let s = make_circle_scenario(
            8,
            50.0,
            PI / 16.0,
            3,
            &CircleOptions {
                gap_width: Some(0.5),
                ..CircleOptions::default()
            },
        );
        let gap = s.gap.unwrap();
        assert_eq!(gap.wall_x, 0.0);
        assert_eq!(gap.gap_width, 0.5);
        assert_eq!(gap.gap_center, Vec2::ZERO);
    }

    #[test]
    fn with_seed_matches_generating_from_that_seed() {
        let opts = CircleOptions::default();
        let derived = make_circle_scenario(6, 50.0, PI / 16.0, 11, &opts).with_seed(99);
        let direct = make_circle_scenario(6, 50.0, PI / 16.0, 99, &opts);
        assert_eq!(derived, direct);
        // Equal-priority scenarios opt out of reseeding entirely.
        let fixed = make_circle_scenario(
            2,
            50.0,
            PI,
            1,
            &CircleOptions {
                equal_priorities: Some(3.0),
                ..CircleOptions::default()
            },
        );
        let reseeded = fixed.with_seed(42);
        assert_eq!(reseeded.seed, 42);
        assert!(reseeded.robots.iter().all(|r| r.priority == 3.0));
    }

    #[test]
    fn priorities_are_reproducible_and_truncated() {
        let a = make_circle_scenario(8, 50.0, PI / 16.0, 42, &CircleOptions::default());
        let b = make_circle_scenario(8, 50.0, PI / 16.0, 42, &CircleOptions::default());
        let pa: Vec<f64> = a.robots.iter().map(|r| r.priority).collect();
        let pb: Vec<f64> = b.robots.iter().map(|r| r.priority).collect();
        assert_eq!(pa, pb);
        assert!(pa.iter().all(|&p| p >= 0.5));
        assert_eq!(a.priority_events, b.priority_events);
        // The event permutes the same multiset of values.
        let mut drawn = pa.clone();
        let mut permuted: Vec<f64> = a.priority_events[0]
            .new_priorities
            .values()
            .copied()
            .collect();
        drawn.sort_by(f64::total_cmp);
        permuted.sort_by(f64::total_cmp);
        assert_eq!(drawn, permuted);
        assert_eq!(a.priority_events[0].at_time, a.max_time / 2.0);
    }

    #[test]
    fn validation_names_the_offending_field() {
        let mut s = make_circle_scenario(2, 50.0, PI, 1, &CircleOptions::default());
        s.dt = 0.0;
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("dt"), "{err}");

        let mut s = make_circle_scenario(2, 50.0, PI, 1, &CircleOptions::default());
        s.priority_events.push(PriorityEvent {
            at_time: 1.0,
            new_priorities: [("ghost".to_string(), 2.0)].into_iter().collect(),
        });
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("priority_events") && err.contains("ghost"), "{err}");
    }
}
