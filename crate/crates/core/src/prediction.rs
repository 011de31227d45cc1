//! Pairwise collision forecasting from current positions and velocities.
//!
//! Under constant velocities the squared separation of two robots is a
//! quadratic in time,
//! `Σ(t)² = ‖Δs‖² + 2(Δs·Δv)t + ‖Δv‖²t²`,
//! so the time of closest approach has a closed form. Both the dialogue
//! trigger and the avoidance maneuver key off the minimum of this curve
//! over a finite horizon.

use crate::geometry::Vec2;

/// Relative speeds with `‖Δv‖²` below this are treated as parallel motion.
pub const PARALLEL_EPS: f64 = 1e-12;

/// Outcome of a closest-approach query over `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproachResult {
    /// Time of closest approach, clamped into `[0, horizon]` (s).
    pub t_star: f64,
    /// Separation at `t_star` (m).
    pub d_min: f64,
}

/// Minimize the separation of two constant-velocity robots over
/// `[0, horizon]`.
///
/// The unconstrained minimizer `t* = −(Δs·Δv)/‖Δv‖²` is clamped to the
/// horizon; when the relative velocity is (near) zero the separation is
/// constant and the current distance is returned at `t_star = 0`.
pub fn closest_approach(
    s_i: Vec2,
    v_i: Vec2,
    s_j: Vec2,
    v_j: Vec2,
    horizon: f64,
) -> ApproachResult {
    debug_assert!(horizon > 0.0);
    let ds = s_i - s_j;
    let dv = v_i - v_j;
    let dv2 = dv.norm_squared();
    if dv2 < PARALLEL_EPS {
        return ApproachResult {
            t_star: 0.0,
            d_min: ds.norm(),
        };
    }
    let t_star = (-ds.dot(dv) / dv2).clamp(0.0, horizon);
    let d_min = (ds + dv * t_star).norm();
    ApproachResult { t_star, d_min }
}

/// True when the predicted minimum separation drops strictly below
/// `safe_distance` within the horizon. A true result fires both reactions:
/// the priority dialogue and the avoidance maneuver.
pub fn collision_imminent(
    s_i: Vec2,
    v_i: Vec2,
    s_j: Vec2,
    v_j: Vec2,
    safe_distance: f64,
    horizon: f64,
) -> bool {
    debug_assert!(safe_distance > 0.0);
    closest_approach(s_i, v_i, s_j, v_j, horizon).d_min < safe_distance
}
