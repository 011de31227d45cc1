//! Comparison planners: the classical quadratic/inverse potential field and
//! a seeded sampling model-predictive controller.

use crate::fields::{AgentState, CircularObstacle, Neighbor, WallGap};
use crate::geometry::{normalize, normalize_or_fallback, Vec2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Gains of the classical potential field (quadratic attraction, inverse
/// repulsion inside the safety distance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassicalApfParams {
    /// Attractive gain η.
    pub eta_attract: f64,
    /// Repulsive gain η.
    pub eta_repulse: f64,
    /// Safety distance σ: repulsion is zero beyond it.
    pub sigma: f64,
}

impl Default for ClassicalApfParams {
    fn default() -> Self {
        ClassicalApfParams {
            eta_attract: 0.3,
            eta_repulse: 20.0,
            sigma: 4.0,
        }
    }
}

/// The repulsion of the classical field is singular as d → 0; magnitudes
/// are capped at this multiple of the gain to keep simulations finite.
pub const APF_REPULSION_CAP: f64 = 1e3;

/// Sampling MPC configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcParams {
    pub horizon_steps: usize,
    pub samples: usize,
    pub collision_weight: f64,
    pub goal_weight: f64,
}

impl Default for MpcParams {
    fn default() -> Self {
        MpcParams {
            horizon_steps: 20,
            samples: 128,
            collision_weight: 50.0,
            goal_weight: 1.0,
        }
    }
}

/// One step of the classical potential field.
///
/// Attraction is the negative gradient of `½η‖g − s‖²`, i.e. `η(g − s)`:
/// unbounded in goal distance, vanishing at the goal. Each hazard within σ
/// adds `η(1/d − 1/σ)(1/d²)` away from it; repulsion from neighbors whose
/// priority was negotiated is scaled by `ρ_other/ρ_self`, mirroring the
/// tangential planner. The returned velocity points along the net force
/// with speed `min(‖F‖, v_max)`.
pub fn classical_apf_step(
    agent: &AgentState,
    neighbors: &[Neighbor],
    obstacles: &[CircularObstacle],
    gap: Option<&WallGap>,
    p: &ClassicalApfParams,
    v_max: f64,
) -> Vec2 {
    let pos = agent.position;
    let mut force = (agent.goal - pos) * p.eta_attract;

    let mut push = |point: Vec2, scale: f64| {
        let away = pos - point;
        let d = away.norm();
        if d >= p.sigma {
            return;
        }
        let d = d.max(crate::geometry::EPS_NORM);
        let magnitude =
            (p.eta_repulse * (1.0 / d - 1.0 / p.sigma) / (d * d)).min(APF_REPULSION_CAP * p.eta_repulse);
        force += normalize_or_fallback(away) * (magnitude * scale);
    };

    for n in neighbors {
        let scale = if n.coordinated {
            n.state.priority / agent.priority
        } else {
            1.0
        };
        push(n.state.position, scale);
    }
    for obs in obstacles {
        // Repel from the nearest boundary point, not the center.
        let radial = normalize_or_fallback(pos - obs.center);
        push(obs.center + radial * obs.radius, 1.0);
    }
    if let Some(g) = gap {
        push(g.nearest_wall_point(pos), 1.0);
    }

    let speed = force.norm().min(v_max);
    match normalize(force) {
        Ok(dir) => dir * speed,
        Err(_) => Vec2::ZERO,
    }
}

/// One step of the sampling MPC.
///
/// Draws `samples` constant-velocity candidate controls (speed in
/// `[0, v_max]`, heading in `[0, 2π)`) from a ChaCha stream seeded with
/// `seed`, rolls each out `horizon_steps` ticks against constant-velocity
/// predictions of the neighbors, and returns the control minimizing
/// `goal_weight·(terminal goal distance) + collision_weight·Σ max(0, σ − minsep)²`.
/// Ties break toward the lowest sample index, so a fixed seed and world
/// give a fixed control.
#[allow(clippy::too_many_arguments)]
pub fn mpc_step(
    agent: &AgentState,
    neighbors: &[Neighbor],
    obstacles: &[CircularObstacle],
    gap: Option<&WallGap>,
    p: &MpcParams,
    dt: f64,
    v_max: f64,
    sigma: f64,
    seed: u64,
) -> Vec2 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = Vec2::ZERO;
    let mut best_cost = f64::INFINITY;
    for _ in 0..p.samples {
        let speed: f64 = rng.random_range(0.0..=v_max);
        let heading: f64 = rng.random_range(0.0..TAU);
        let control = Vec2::from_angle(heading) * speed;
        let cost = rollout_cost(agent, neighbors, obstacles, gap, p, dt, sigma, control);
        if cost < best_cost {
            best_cost = cost;
            best = control;
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn rollout_cost(
    agent: &AgentState,
    neighbors: &[Neighbor],
    obstacles: &[CircularObstacle],
    gap: Option<&WallGap>,
    p: &MpcParams,
    dt: f64,
    sigma: f64,
    control: Vec2,
) -> f64 {
    let mut pos = agent.position;
    let mut penalty = 0.0;
    for step in 1..=p.horizon_steps {
        pos += control * dt;
        let t = step as f64 * dt;
        let mut min_sep = f64::INFINITY;
        for n in neighbors {
            let other = n.state.position + n.state.velocity * t;
            min_sep = min_sep.min(pos.distance(other));
        }
        for obs in obstacles {
            min_sep = min_sep.min(obs.boundary_distance(pos));
        }
        if let Some(g) = gap {
            min_sep = min_sep.min(g.wall_distance(pos));
        }
        if min_sep < sigma {
            let violation = sigma - min_sep;
            penalty += violation * violation;
        }
    }
    p.goal_weight * pos.distance(agent.goal) + p.collision_weight * penalty
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent_at(pos: Vec2, goal: Vec2) -> AgentState {
        AgentState {
            position: pos,
            velocity: Vec2::ZERO,
            heading: 0.0,
            goal,
            priority: 3.0,
        }
    }

    fn neighbor_at(pos: Vec2, priority: f64, coordinated: bool) -> Neighbor {
        Neighbor {
            state: AgentState {
                position: pos,
                velocity: Vec2::ZERO,
                heading: 0.0,
                goal: pos,
                priority,
            },
            coordinated,
        }
    }

    #[test]
    fn pure_attraction_is_linear_in_goal_distance() {
        // η=1, goal 1 m away, no hazards: force (1, 0); the analytic
        // gradient of the quadratic potential.
        let p = ClassicalApfParams {
            eta_attract: 1.0,
            ..ClassicalApfParams::default()
        };
        let v = classical_apf_step(
            &agent_at(Vec2::ZERO, Vec2::new(1.0, 0.0)),
            &[],
            &[],
            None,
            &p,
            100.0,
        );
        assert!((v - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        // Unbounded growth: doubling the distance doubles the magnitude,
        // unlike the saturating field.
        let v2 = classical_apf_step(
            &agent_at(Vec2::ZERO, Vec2::new(2.0, 0.0)),
            &[],
            &[],
            None,
            &p,
            100.0,
        );
        assert!((v2.norm() - 2.0 * v.norm()).abs() < 1e-12);
    }

    #[test]
    fn repulsion_vanishes_at_sigma_and_is_continuous() {
        let p = ClassicalApfParams::default();
        let goalless = agent_at(Vec2::ZERO, Vec2::ZERO);
        // Hazard exactly at σ: no contribution.
        let at_sigma = classical_apf_step(
            &goalless,
            &[neighbor_at(Vec2::new(p.sigma, 0.0), 3.0, false)],
            &[],
            None,
            &p,
            100.0,
        );
        assert_eq!(at_sigma, Vec2::ZERO);
        // Just inside σ: tiny repulsion pointing away.
        let inside = classical_apf_step(
            &goalless,
            &[neighbor_at(Vec2::new(p.sigma - 1e-6, 0.0), 3.0, false)],
            &[],
            None,
            &p,
            100.0,
        );
        assert!(inside.x < 0.0);
        assert!(inside.norm() < 1e-4);
    }

    #[test]
    fn symmetric_head_on_pair_has_no_lateral_force() {
        // The documented local-minimum failure: everything stays on the
        // axis of symmetry.
        let p = ClassicalApfParams::default();
        let a = agent_at(Vec2::new(-0.4, 0.0), Vec2::new(10.0, 0.0));
        let v = classical_apf_step(
            &a,
            &[neighbor_at(Vec2::new(0.4, 0.0), 3.0, false)],
            &[],
            None,
            &p,
            100.0,
        );
        assert_eq!(v.y, 0.0);
    }

    #[test]
    fn speed_caps_at_v_max() {
        let p = ClassicalApfParams::default();
        let v = classical_apf_step(
            &agent_at(Vec2::ZERO, Vec2::new(1000.0, 0.0)),
            &[],
            &[],
            None,
            &p,
            15.0,
        );
        assert!((v.norm() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn mpc_empty_world_makes_goal_progress() {
        let p = MpcParams::default();
        let agent = agent_at(Vec2::ZERO, Vec2::new(30.0, 0.0));
        let control = mpc_step(&agent, &[], &[], None, &p, 0.05, 15.0, 1.0, 7);
        let terminal = agent.position + control * (0.05 * p.horizon_steps as f64);
        assert!(terminal.distance(agent.goal) < agent.position.distance(agent.goal));
        assert!(control.norm() <= 15.0 + 1e-12);
    }

    #[test]
    fn mpc_prefers_violation_free_candidates() {
        // A stationary blocker sits right on the goal line; ramming it
        // costs more than any detour of equal progress.
        let p = MpcParams {
            samples: 256,
            ..MpcParams::default()
        };
        let agent = agent_at(Vec2::ZERO, Vec2::new(10.0, 0.0));
        let blocker = neighbor_at(Vec2::new(2.0, 0.0), 3.0, false);
        let control = mpc_step(&agent, &[blocker], &[], None, &p, 0.05, 15.0, 1.0, 11);
        let mut pos = agent.position;
        let mut min_sep = f64::INFINITY;
        for _ in 0..p.horizon_steps {
            pos += control * 0.05;
            min_sep = min_sep.min(pos.distance(blocker.state.position));
        }
        assert!(min_sep > 0.5, "picked a ramming control, min_sep={min_sep}");
    }

    #[test]
    fn mpc_is_deterministic_for_a_fixed_seed() {
        let p = MpcParams::default();
        let agent = agent_at(Vec2::new(1.0, 2.0), Vec2::new(-20.0, 4.0));
        let n = [neighbor_at(Vec2::new(-3.0, 2.0), 4.0, true)];
        let a = mpc_step(&agent, &n, &[], None, &p, 0.05, 15.0, 1.0, 1234);
        let b = mpc_step(&agent, &n, &[], None, &p, 0.05, 15.0, 1.0, 1234);
        assert_eq!(a, b);
    }
}
