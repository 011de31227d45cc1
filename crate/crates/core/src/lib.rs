//! Deterministic 2D multi-robot collision-avoidance simulation.
//!
//! The planner steers robots with exponential potential fields whose
//! repulsion is rotated a quarter turn, producing a roundabout-like
//! circulation instead of head-on standstills; conflicting robots
//! negotiate right-of-way priorities over a natural-language dialogue
//! (live service or deterministic stand-in). Classical potential-field and
//! sampling-MPC baselines, a metrics harness (time to goal, mean minimum
//! distance, flow rate, fairness), and serialization of every run artifact
//! round out the crate.
//!
//! With the default `parallel` feature, per-tick planning and batch runs
//! fan out on rayon with bit-identical results to the sequential fallback.

pub mod baselines;
pub mod engine;
pub mod fields;
pub mod formats;
pub mod geometry;
pub mod log;
pub mod metrics;
pub mod negotiation;
pub mod prediction;
pub mod scenario;

pub use engine::{run, run_with, run_with_client, EngineError, Negotiator, RobotState};
pub use fields::{AgentState, CircularObstacle, FieldParams, Neighbor, WallGap};
pub use geometry::{Pose, Vec2};
pub use log::TrajectoryLog;
pub use metrics::MetricsReport;
pub use scenario::{
    make_circle_scenario, CircleOptions, NegotiatorKind, PlannerKind, Scenario,
};

/// Series oracles used only by tests to cross-check library math through an
/// independent route.
#[cfg(test)]
pub(crate) mod test_oracles {
    /// Error function by its Maclaurin series, `erf(z) = 2/√π · Σ (−1)^n
    /// z^{2n+1} / (n!(2n+1))`. Converges quickly for |z| ≲ 3, which covers
    /// every test input; truncation below 1e-17 per term.
    pub fn erf_series(z: f64) -> f64 {
        let mut term = z;
        let mut sum = z;
        let mut n = 0usize;
        while term.abs() > 1e-17 && n < 200 {
            n += 1;
            // term_{n} = term_{n-1} · (−z²/n), then divided by (2n+1)
            term *= -z * z / n as f64;
            sum += term / (2.0 * n as f64 + 1.0);
        }
        sum * 2.0 / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn series_matches_known_values() {
        // Reference digits from standard tables.
        assert!((erf_series(1.0) - 0.842_700_792_949_715).abs() < 1e-12);
        assert!((erf_series(0.5) - 0.520_499_877_813_047).abs() < 1e-12);
        assert!((erf_series(2.0) - 0.995_322_265_018_953).abs() < 1e-12);
        assert!(erf_series(0.0) == 0.0);
        assert!((erf_series(-1.0) + 0.842_700_792_949_715).abs() < 1e-12);
    }

    #[test]
    fn series_agrees_with_libm() {
        for k in 0..60 {
            let z = 0.05 * k as f64;
            assert!((erf_series(z) - libm::erf(z)).abs() < 1e-12, "z={z}");
        }
    }
}
