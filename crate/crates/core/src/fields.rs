//! The tangential-field planner: saturating exponential attraction,
//! priority-scaled tangential repulsion (the roundabout effect), obstacle
//! tangent steering, subgoal attraction for gap traversal, and blended
//! velocity steering with right-of-way speed governance.

use crate::geometry::{
    normalize, normalize_angle, normalize_or_fallback, rotate90, Vec2, EPS_NORM,
};
use libm::erf;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    /// A robot is strictly inside an obstacle; scenario setup or integration
    /// went wrong upstream.
    #[error("robot at ({x:.3}, {y:.3}) is inside the obstacle centered at ({cx:.3}, {cy:.3})")]
    InsideObstacle { x: f64, y: f64, cx: f64, cy: f64 },
    /// Attraction and repulsion cancel; the caller keeps its previous
    /// heading.
    #[error("net force is zero, heading undefined")]
    ZeroNetForce,
    #[error("invalid field parameter: {0}")]
    InvalidParams(String),
}

/// Which priority ratio scales the tangential repulsion felt by a robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityScaling {
    /// Scale by `ρ_other / ρ_self`: the lower-priority robot of a pair feels
    /// the stronger deflection and yields. This matches the intended
    /// right-of-way behavior and is the default.
    #[default]
    OtherOverSelf,
    /// Scale by `ρ_self / ρ_other` (the inverse convention), kept selectable
    /// for comparison studies.
    SelfOverOther,
}

/// All gains and spreads of the planner.
///
/// The sign conventions are load-bearing: `phi_attract < 0` so the
/// attraction saturates at `kappa_attract` far from the goal and vanishes at
/// it, `phi_repulse > 0` so the repulsion decays with squared distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldParams {
    /// Attractive gain κ (force ceiling far from the goal).
    pub kappa_attract: f64,
    /// Attractive spread φ, strictly negative (1/m²).
    pub phi_attract: f64,
    /// Repulsive gain κ.
    pub kappa_repulse: f64,
    /// Repulsive spread φ, strictly positive (1/m²).
    pub phi_repulse: f64,
    /// Spread of the gap-subgoal attraction (1/m²).
    pub subgoal_decay: f64,
    /// Distance at which avoidance steering starts to take over (m).
    pub blend_influence: f64,
    /// Speed ceiling (m/s).
    pub v_max: f64,
    pub priority_scaling: PriorityScaling,
    /// The priority ratio entering the repulsion is clamped to
    /// `[1/cap, cap]` so extreme priority gaps cannot catapult a robot.
    pub priority_ratio_cap: f64,
    /// Speed fraction while a conflict with an uncoordinated neighbor is
    /// unresolved. Robots that have not exchanged priorities slow down near
    /// each other instead of assuming right-of-way.
    pub caution_factor: f64,
    /// Radius of the unresolved-conflict slowdown around other robots (m).
    pub caution_radius: f64,
    /// Slowdown radius around static hazards, walls and obstacles (m).
    pub static_caution_radius: f64,
    /// Speed fraction inside the static-hazard slowdown zone.
    pub static_caution_factor: f64,
    /// Progress gap a yielding robot keeps behind a higher-priority one (m).
    pub pace_headway: f64,
    /// Speed fraction while fully blocked by a leader; 0 holds position.
    pub pace_floor: f64,
    /// A yielding robot may close in to this remaining distance regardless
    /// of how far back its leaders are; the final approach inside the ring
    /// stays priority-ordered.
    pub pace_hold_radius: f64,
    /// A held robot whose nearest neighbor comes closer than this moves at
    /// caution speed again so the tangential field can keep robots apart.
    pub spacing_guard: f64,
    /// Base radius of the single-file column in front of a wall opening.
    pub gap_queue_radius: f64,
}

impl Default for FieldParams {
    fn default() -> Self {
        FieldParams {
            kappa_attract: 2.0,
            phi_attract: -0.3,
            kappa_repulse: 8.0,
            phi_repulse: 0.10,
            subgoal_decay: 1.0,
            blend_influence: 8.0,
            v_max: 15.0,
            priority_scaling: PriorityScaling::OtherOverSelf,
            priority_ratio_cap: 2.0,
            caution_factor: 0.3,
            caution_radius: 14.0,
            static_caution_radius: 8.0,
            static_caution_factor: 0.5,
            pace_headway: 4.0,
            pace_floor: 0.0,
            pace_hold_radius: 6.0,
            spacing_guard: 2.0,
            gap_queue_radius: 8.0,
        }
    }
}

impl FieldParams {
    // Negated comparisons so NaN fails validation too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), FieldError> {
        let bad = |m: &str| Err(FieldError::InvalidParams(m.to_string()));
        if !(self.kappa_attract > 0.0) {
            return bad("kappa_attract must be > 0");
        }
        if !(self.phi_attract < 0.0) {
            return bad("phi_attract must be < 0");
        }
        if !(self.kappa_repulse > 0.0) {
            return bad("kappa_repulse must be > 0");
        }
        if !(self.phi_repulse > 0.0) {
            return bad("phi_repulse must be > 0");
        }
        if !(self.subgoal_decay > 0.0) {
            return bad("subgoal_decay must be > 0");
        }
        if !(self.blend_influence > 0.0) {
            return bad("blend_influence must be > 0");
        }
        if !(self.v_max > 0.0) {
            return bad("v_max must be > 0");
        }
        if !(self.priority_ratio_cap >= 1.0) {
            return bad("priority_ratio_cap must be >= 1");
        }
        if !(self.caution_factor > 0.0 && self.caution_factor <= 1.0) {
            return bad("caution_factor must be in (0, 1]");
        }
        if !(self.caution_radius >= 0.0) {
            return bad("caution_radius must be >= 0");
        }
        if !(self.static_caution_radius >= 0.0) {
            return bad("static_caution_radius must be >= 0");
        }
        if !(self.static_caution_factor > 0.0 && self.static_caution_factor <= 1.0) {
            return bad("static_caution_factor must be in (0, 1]");
        }
        if !(self.pace_headway > 0.0) {
            return bad("pace_headway must be > 0");
        }
        if !(self.pace_floor >= 0.0 && self.pace_floor <= 1.0) {
            return bad("pace_floor must be in [0, 1]");
        }
        if !(self.pace_hold_radius > 0.0) {
            return bad("pace_hold_radius must be > 0");
        }
        if !(self.spacing_guard >= 0.0) {
            return bad("spacing_guard must be >= 0");
        }
        if !(self.gap_queue_radius > 0.0) {
            return bad("gap_queue_radius must be > 0");
        }
        Ok(())
    }
}

/// A static circular obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularObstacle {
    pub center: Vec2,
    pub radius: f64,
}

impl CircularObstacle {
    /// Distance from `p` to the obstacle boundary, clamped at 0 on or
    /// inside the boundary.
    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        (p.distance(self.center) - self.radius).max(0.0)
    }
}

/// Two vertical walls on the line `x = wall_x` separated by a gap of width
/// `gap_width` centered at `gap_center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallGap {
    pub wall_x: f64,
    /// Gap center ω; the subgoal robots steer through.
    pub gap_center: Vec2,
    pub gap_width: f64,
}

impl WallGap {
    pub fn half_width(&self) -> f64 {
        self.gap_width / 2.0
    }

    /// True when a y-coordinate lies inside the opening.
    pub fn within_opening(&self, y: f64) -> bool {
        (y - self.gap_center.y).abs() < self.half_width()
    }

    /// Has a robot at `x` no further use for the subgoal, i.e. is it on the
    /// same side of the wall line as its goal?
    pub fn crossed(&self, x: f64, goal_x: f64) -> bool {
        let side = x - self.wall_x;
        let goal_side = goal_x - self.wall_x;
        side == 0.0 || side.signum() == goal_side.signum()
    }

    /// Nearest point of the wall material (the line minus the opening).
    pub fn nearest_wall_point(&self, p: Vec2) -> Vec2 {
        let y = if self.within_opening(p.y) {
            // Snap to the nearer gap edge.
            let upper = self.gap_center.y + self.half_width();
            let lower = self.gap_center.y - self.half_width();
            if (p.y - upper).abs() <= (p.y - lower).abs() {
                upper
            } else {
                lower
            }
        } else {
            p.y
        };
        Vec2::new(self.wall_x, y)
    }

    pub fn wall_distance(&self, p: Vec2) -> f64 {
        p.distance(self.nearest_wall_point(p))
    }
}

/// Attractive potential `U(d) = κd − κ·√π/(2√(−φ))·erf(√(−φ)·d)` with
/// `d = ‖g − s‖`. Evaluated only to verify the force is its negative
/// gradient.
pub fn attractive_potential(s: Vec2, g: Vec2, p: &FieldParams) -> f64 {
    let d = s.distance(g);
    let root = (-p.phi_attract).sqrt();
    p.kappa_attract * d - p.kappa_attract * (PI.sqrt() / (2.0 * root)) * erf(root * d)
}

/// Saturating attraction toward the goal with magnitude
/// `κ(1 − e^{φd²})`: bounded by κ far out, vanishing smoothly at the goal
/// so obstacle repulsion cannot overpower it into a goal-adjacent minimum.
pub fn attractive_force(s: Vec2, g: Vec2, p: &FieldParams) -> Vec2 {
    let to_goal = g - s;
    let d2 = to_goal.norm_squared();
    match normalize(to_goal) {
        Ok(dir) => dir * (p.kappa_attract * (1.0 - (p.phi_attract * d2).exp())),
        Err(_) => Vec2::ZERO, // at the goal
    }
}

/// Repulsive potential `U(d) = −κ·√π/(2√φ)·erf(√φ·d)`, used to verify the
/// radial repulsion magnitude `κe^{−φd²}` equals `−dU/dd`.
pub fn repulsive_potential(d_ij: f64, p: &FieldParams) -> f64 {
    debug_assert!(d_ij >= 0.0);
    let root = p.phi_repulse.sqrt();
    -p.kappa_repulse * (PI.sqrt() / (2.0 * root)) * erf(root * d_ij)
}

fn priority_factor(rho_self: f64, rho_other: f64, p: &FieldParams) -> f64 {
    let ratio = match p.priority_scaling {
        PriorityScaling::OtherOverSelf => rho_other / rho_self,
        PriorityScaling::SelfOverOther => rho_self / rho_other,
    };
    ratio.clamp(1.0 / p.priority_ratio_cap, p.priority_ratio_cap)
}

/// Tangential repulsion exerted on the robot at `s_i` by the one at `s_j`.
///
/// The radial repulsion `κe^{−φd²}·d̂` is turned a quarter turn, so
/// conflicting robots circulate past each other like traffic in a
/// roundabout instead of stalling head-on. The magnitude is scaled by the
/// priority ratio (see [`PriorityScaling`]); only the ratio matters, so
/// rescaling both priorities leaves the force bit-identical.
pub fn tangential_repulsive_force(
    s_i: Vec2,
    s_j: Vec2,
    rho_i: f64,
    rho_j: f64,
    p: &FieldParams,
) -> Vec2 {
    debug_assert!(rho_i > 0.0 && rho_j > 0.0);
    let away = s_i - s_j;
    let magnitude = priority_factor(rho_i, rho_j, p)
        * p.kappa_repulse
        * (-p.phi_repulse * away.norm_squared()).exp();
    rotate90(normalize_or_fallback(away)) * magnitude
}

/// Tangent-direction steering force of a circular obstacle, with magnitude
/// `κe^{−φb²}` for boundary distance `b`. Of the two tangent directions at
/// the closest boundary point, the one making the larger dot product with
/// `goal_dir` is chosen (ties counter-clockwise), so the robot rounds the
/// obstacle on the side that serves its goal.
pub fn obstacle_tangent_force(
    s_i: Vec2,
    obs: &CircularObstacle,
    goal_dir: Vec2,
    p: &FieldParams,
) -> Result<Vec2, FieldError> {
    let radial = s_i - obs.center;
    let dist = radial.norm();
    if dist < obs.radius - EPS_NORM {
        return Err(FieldError::InsideObstacle {
            x: s_i.x,
            y: s_i.y,
            cx: obs.center.x,
            cy: obs.center.y,
        });
    }
    let b = (dist - obs.radius).max(0.0);
    let magnitude = p.kappa_repulse * (-p.phi_repulse * b * b).exp();
    let radial_unit = normalize_or_fallback(radial);
    let ccw = -rotate90(radial_unit);
    let cw = rotate90(radial_unit);
    let tangent = if cw.dot(goal_dir) > ccw.dot(goal_dir) {
        cw
    } else {
        ccw
    };
    Ok(tangent * magnitude)
}

/// Attraction toward the gap center ω with the same saturating profile as
/// [`attractive_force`], spread governed by `subgoal_decay`.
pub fn subgoal_attraction(s_i: Vec2, gap: &WallGap, p: &FieldParams) -> Vec2 {
    let toward = gap.gap_center - s_i;
    let d2 = toward.norm_squared();
    match normalize(toward) {
        Ok(dir) => dir * (p.kappa_attract * (1.0 - (-p.subgoal_decay * d2).exp())),
        Err(_) => Vec2::ZERO,
    }
}

/// Heading of the summed force, normalized to `[0, 2π)`; the two-argument
/// arctangent resolves the full quadrant.
pub fn compose_heading(f_attr: Vec2, f_rep_total: Vec2) -> Result<f64, FieldError> {
    let net = f_attr + f_rep_total;
    if net.norm() <= EPS_NORM {
        Err(FieldError::ZeroNetForce)
    } else {
        Ok(normalize_angle(net.y.atan2(net.x)))
    }
}

/// Rotate the current velocity toward `theta_new`, blending by hazard
/// proximity: with `β = min(1, d/blend_influence)` the result is
/// `β·v_cur + (1−β)·candidate`, where the candidate is the current speed
/// re-aimed along the new heading. At contact the avoidance direction wins
/// outright; far from hazards the current motion is kept. Output speed is
/// clamped to `v_max`.
pub fn steer_velocity(
    v_cur: Vec2,
    theta_new: f64,
    dist_nearest_hazard: f64,
    p: &FieldParams,
) -> Vec2 {
    let speed = v_cur.norm();
    let candidate = Vec2::from_angle(theta_new) * speed;
    let beta = (dist_nearest_hazard / p.blend_influence).clamp(0.0, 1.0);
    let blended = v_cur * beta + candidate * (1.0 - beta);
    let out_speed = blended.norm();
    if out_speed > p.v_max {
        blended * (p.v_max / out_speed)
    } else {
        blended
    }
}

/// Remaining travel distance accounting for the wall: a robot that has not
/// crossed yet must route through the gap center first.
pub fn remaining_path(position: Vec2, goal: Vec2, gap: Option<&WallGap>) -> f64 {
    match gap {
        Some(g) if !g.crossed(position.x, goal.x) => {
            position.distance(g.gap_center) + g.gap_center.distance(goal)
        }
        _ => position.distance(goal),
    }
}

/// Kinematic slice of a robot as seen by the planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub heading: f64,
    pub goal: Vec2,
    pub priority: f64,
}

/// Another active robot, plus whether a negotiated right-of-way exists with
/// it. Priorities are only partially observable: a robot acts on a
/// neighbor's priority only after the pair has communicated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub state: AgentState,
    pub coordinated: bool,
}

/// Planner output for one robot and one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedMotion {
    pub velocity: Vec2,
    pub heading: f64,
}

/// One planning step of the tangential-field method.
///
/// Sums the attraction (or the gap-subgoal attraction while the wall is
/// still ahead) with all pairwise tangential repulsions and obstacle
/// tangent forces, composes the new heading, governs the commanded speed by
/// right-of-way, and steers the velocity. Never returns a speed above
/// `v_max`.
///
/// Speed governance implements the right-of-way rules reactively:
/// * a robot near an uncoordinated neighbor slows to `caution_factor`
///   (right-of-way unresolved, both sides get cautious);
/// * a robot that has yielded to a higher-priority neighbor paces itself so
///   the leader stays `pace_headway` ahead in remaining distance, which
///   makes arrival order follow priority order.
pub fn faca_step(
    agent: &AgentState,
    neighbors: &[Neighbor],
    obstacles: &[CircularObstacle],
    gap: Option<&WallGap>,
    p: &FieldParams,
) -> Result<PlannedMotion, FieldError> {
    let pos = agent.position;
    let (f_attr, target) = match gap {
        Some(g) if !g.crossed(pos.x, agent.goal.x) => {
            (subgoal_attraction(pos, g, p), g.gap_center)
        }
        _ => (attractive_force(pos, agent.goal, p), agent.goal),
    };
    let goal_dir = normalize_or_fallback(target - pos);

    let mut f_rep = Vec2::ZERO;
    let mut nearest = f64::INFINITY;
    for n in neighbors {
        // Unknown priorities repel as equals.
        let (rho_i, rho_j) = if n.coordinated {
            (agent.priority, n.state.priority)
        } else {
            (1.0, 1.0)
        };
        f_rep += tangential_repulsive_force(pos, n.state.position, rho_i, rho_j, p);
        nearest = nearest.min(pos.distance(n.state.position));
    }
    for obs in obstacles {
        f_rep += obstacle_tangent_force(pos, obs, goal_dir, p)?;
        nearest = nearest.min(obs.boundary_distance(pos));
    }
    if let Some(g) = gap {
        nearest = nearest.min(g.wall_distance(pos));
    }

    let mut theta_new = match compose_heading(f_attr, f_rep) {
        Ok(t) => t,
        Err(FieldError::ZeroNetForce) => agent.heading,
        Err(e) => return Err(e),
    };

    let mut speed = governed_speed(agent, neighbors, obstacles, gap, p);
    let nearest_robot = neighbors
        .iter()
        .map(|n| pos.distance(n.state.position))
        .fold(f64::INFINITY, f64::min);
    if speed < EPS_NORM && nearest_robot < p.spacing_guard {
        // A held robot crowded below the spacing guard drifts on the
        // repulsion field alone: it separates without making progress.
        speed = p.caution_factor * p.v_max;
        if let Ok(t) = compose_heading(Vec2::ZERO, f_rep) {
            theta_new = t;
        }
    }
    let cur_dir = normalize(agent.velocity)
        .unwrap_or_else(|_| Vec2::from_angle(agent.heading));
    let velocity = if nearest >= p.blend_influence {
        // No hazard has steering authority; aim straight along the field.
        Vec2::from_angle(theta_new) * speed
    } else {
        steer_velocity(cur_dir * speed, theta_new, nearest, p)
    };
    let heading = if velocity.norm() > EPS_NORM {
        velocity.angle()
    } else {
        theta_new
    };
    Ok(PlannedMotion { velocity, heading })
}

/// Commanded cruise speed after the right-of-way rules.
fn governed_speed(
    agent: &AgentState,
    neighbors: &[Neighbor],
    obstacles: &[CircularObstacle],
    gap: Option<&WallGap>,
    p: &FieldParams,
) -> f64 {
    let pos = agent.position;
    let remaining = remaining_path(pos, agent.goal, gap);
    let mut factor: f64 = 1.0;

    let mut cautious = false;
    let mut near_static = false;
    for n in neighbors {
        let d = pos.distance(n.state.position);
        if !n.coordinated {
            cautious |= d < p.caution_radius;
            continue;
        }
        if n.state.priority > agent.priority {
            let leader_remaining = remaining_path(n.state.position, n.state.goal, gap);
            let lead = if remaining >= leader_remaining {
                // Behind the leader: trail it by pace_headway of remaining
                // path distance. When the two goals are close enough that
                // the endgames overlap, queue outside the hold ring while
                // the leader flies its final approach.
                let endgames_overlap =
                    agent.goal.distance(n.state.goal) < 2.0 * p.pace_hold_radius;
                let target = if endgames_overlap {
                    leader_remaining.max(p.pace_hold_radius)
                } else {
                    leader_remaining
                };
                remaining - target
            } else {
                // Ahead of a higher-priority robot: keep moving, but stop
                // at the hold ring until the leader has passed. Arrival
                // order is enforced at the goal, not mid-route.
                remaining - p.pace_hold_radius
            };
            factor = factor.min((lead / p.pace_headway).clamp(p.pace_floor, 1.0));
        }
    }
    for obs in obstacles {
        near_static |= obs.boundary_distance(pos) < p.static_caution_radius;
    }
    if let Some(g) = gap {
        near_static |= g.wall_distance(pos) < p.static_caution_radius;
        // Single-file column through the gap: with k higher-priority robots
        // still heading for the opening, park at the k-th ring out from
        // the mouth and advance as the column drains.
        if !g.crossed(pos.x, agent.goal.x) {
            let queued_ahead = neighbors
                .iter()
                .filter(|n| {
                    n.coordinated
                        && n.state.priority > agent.priority
                        && !g.crossed(n.state.position.x, n.state.goal.x)
                })
                .count();
            if queued_ahead > 0 {
                let slot = p.gap_queue_radius + (queued_ahead - 1) as f64 * p.pace_headway;
                let d_mouth = pos.distance(g.gap_center);
                factor = factor.min(((d_mouth - slot) / p.pace_headway).clamp(0.0, 1.0));
            }
        }
    }
    if cautious {
        factor = factor.min(p.caution_factor);
    }
    if near_static {
        factor = factor.min(p.static_caution_factor);
    }
    factor * p.v_max
}
