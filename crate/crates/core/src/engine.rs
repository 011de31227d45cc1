//! The synchronous simulation loop: trigger evaluation, negotiation
//! dispatch, planner invocation, integration, event application,
//! termination, and logging.
//!
//! Every robot plans against the same frozen snapshot of the world, so the
//! per-robot planning inside a tick is order-free and, with the `parallel`
//! feature, runs on a rayon pool with bit-identical results.

use crate::baselines::{classical_apf_step, mpc_step};
use crate::fields::{faca_step, AgentState, FieldError, Neighbor};
use crate::geometry::{normalize_or_fallback, Vec2, EPS_NORM};
use crate::log::{RobotMeta, RobotSnap, SessionRecord, Snapshot, TrajectoryLog, LOG_FORMAT_VERSION};
use crate::negotiation::client::ChatClient;
use crate::negotiation::{
    apply_assignment, llm_negotiate, scripted_negotiate, MissionContext, NegotiationError,
    PriorityAssignment, SessionBook,
};
use crate::prediction::collision_imminent;
use crate::scenario::{NegotiatorKind, PlannerKind, Scenario};
use crate::formats::digest64;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("robot `{id}` is inside an obstacle at t={time:.3}: {detail}")]
    InsideObstacle {
        id: String,
        time: f64,
        detail: String,
    },
    #[error("scenario invalid: {0}")]
    InvalidScenario(#[from] crate::scenario::ScenarioError),
    #[error("scenario requests the llm negotiator; use run_with_client")]
    MissingChatClient,
    #[error("negotiation failed: {0}")]
    Negotiation(#[from] NegotiationError),
}

/// Live state of one robot during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub id: String,
    pub position: Vec2,
    pub velocity: Vec2,
    pub heading: f64,
    pub goal: Vec2,
    pub priority: f64,
    pub v_max: f64,
    pub mission: String,
    pub urgency: Option<String>,
    pub arrived_at: Option<f64>,
}

impl RobotState {
    fn active(&self) -> bool {
        self.arrived_at.is_none()
    }

    fn agent_state(&self) -> AgentState {
        AgentState {
            position: self.position,
            velocity: self.velocity,
            heading: self.heading,
            goal: self.goal,
            priority: self.priority,
        }
    }

    fn mission_context(&self) -> MissionContext {
        MissionContext {
            robot_id: self.id.clone(),
            mission_text: self.mission.clone(),
            priority: self.priority,
            distance_to_goal: self.position.distance(self.goal),
            urgency_note: self.urgency.clone(),
        }
    }
}

/// How negotiation requests are served during a run.
pub enum Negotiator<'a> {
    None,
    Scripted,
    Llm {
        client: &'a dyn ChatClient,
        /// Fall back to the scripted rule on failure or non-convergence.
        fallback: bool,
    },
}

type PairKey = (String, String);

fn pair_key(a: &str, b: &str) -> PairKey {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

struct World {
    robots: Vec<RobotState>,
    time: f64,
    tick: u64,
    book: SessionBook,
    /// Pairs that have exchanged priorities at least once.
    coordinated: std::collections::BTreeSet<PairKey>,
    cooldown_until: BTreeMap<PairKey, f64>,
    /// Assignments waiting for their simulated latency to elapse.
    pending: Vec<PendingResolution>,
    records: Vec<SessionRecord>,
    events_applied: usize,
}

struct PendingResolution {
    due_tick: u64,
    assignment: PriorityAssignment,
    record: SessionRecord,
}

/// Result of planning one robot against the frozen snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedStep {
    pub velocity: Vec2,
    pub heading: f64,
}

/// Frozen per-tick view used by the planner dispatch; cheap to share across
/// threads.
pub struct TickContext<'a> {
    pub scenario: &'a Scenario,
    pub robots: &'a [RobotState],
    pub coordinated: &'a std::collections::BTreeSet<PairKey>,
    pub tick: u64,
}

fn plan_one(ctx: &TickContext<'_>, idx: usize) -> Result<PlannedStep, EngineError> {
    let me = &ctx.robots[idx];
    debug_assert!(me.active());
    let neighbors: Vec<Neighbor> = ctx
        .robots
        .iter()
        .filter(|r| r.active() && r.id != me.id)
        .map(|r| Neighbor {
            state: r.agent_state(),
            coordinated: ctx.coordinated.contains(&pair_key(&me.id, &r.id)),
        })
        .collect();
    let scenario = ctx.scenario;
    match scenario.planner {
        PlannerKind::Faca => {
            let motion = faca_step(
                &me.agent_state(),
                &neighbors,
                &scenario.obstacles,
                scenario.gap.as_ref(),
                &scenario.field_params,
            )
            .map_err(|e: FieldError| EngineError::InsideObstacle {
                id: me.id.clone(),
                time: ctx.tick as f64 * scenario.dt,
                detail: e.to_string(),
            })?;
            Ok(PlannedStep {
                velocity: motion.velocity,
                heading: motion.heading,
            })
        }
        PlannerKind::ClassicalApf => {
            let velocity = classical_apf_step(
                &me.agent_state(),
                &neighbors,
                &scenario.obstacles,
                scenario.gap.as_ref(),
                &scenario.apf_params,
                me.v_max,
            );
            Ok(PlannedStep {
                velocity,
                heading: heading_of(velocity, me.heading),
            })
        }
        PlannerKind::Mpc => {
            let seed = mpc_seed(scenario.seed, ctx.tick, &me.id);
            // A margin wider than the corridor forbids the corridor
            // entirely; cap it at what the opening affords.
            let sigma = match &scenario.gap {
                Some(g) => scenario.safe_distance.min(0.8 * g.half_width()),
                None => scenario.safe_distance,
            };
            let velocity = mpc_step(
                &me.agent_state(),
                &neighbors,
                &scenario.obstacles,
                scenario.gap.as_ref(),
                &scenario.mpc_params,
                scenario.dt,
                me.v_max,
                sigma,
                seed,
            );
            Ok(PlannedStep {
                velocity,
                heading: heading_of(velocity, me.heading),
            })
        }
    }
}

fn heading_of(velocity: Vec2, fallback: f64) -> f64 {
    if velocity.norm() > EPS_NORM {
        velocity.angle()
    } else {
        fallback
    }
}

/// Per-robot MPC stream: a function of the run seed, the tick, and the
/// robot identity, never of evaluation order.
fn mpc_seed(run_seed: u64, tick: u64, robot_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |byte: u8| {
        h ^= byte as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    };
    for b in run_seed.to_le_bytes() {
        eat(b);
    }
    for b in tick.to_le_bytes() {
        eat(b);
    }
    for b in robot_id.as_bytes() {
        eat(*b);
    }
    h
}

/// Plan every active robot sequentially. Always available; the baseline
/// the parallel path is checked against.
pub fn plan_tick_sequential(ctx: &TickContext<'_>) -> Result<Vec<(usize, PlannedStep)>, EngineError> {
    let mut out = Vec::new();
    for idx in 0..ctx.robots.len() {
        if ctx.robots[idx].active() {
            out.push((idx, plan_one(ctx, idx)?));
        }
    }
    Ok(out)
}

/// Plan every active robot on the rayon pool. Reads only the frozen
/// snapshot, so the result is bit-identical to the sequential path.
#[cfg(feature = "parallel")]
pub fn plan_tick_parallel(ctx: &TickContext<'_>) -> Result<Vec<(usize, PlannedStep)>, EngineError> {
    use rayon::prelude::*;
    let indices: Vec<usize> = (0..ctx.robots.len())
        .filter(|&i| ctx.robots[i].active())
        .collect();
    indices
        .into_par_iter()
        .map(|idx| plan_one(ctx, idx).map(|p| (idx, p)))
        .collect()
}

/// Below this many robots the rayon dispatch overhead outweighs the work
/// (measured in `benches/planning.rs`); small worlds plan sequentially.
#[cfg(feature = "parallel")]
const PARALLEL_PLAN_THRESHOLD: usize = 64;

fn plan_tick(ctx: &TickContext<'_>) -> Result<Vec<(usize, PlannedStep)>, EngineError> {
    #[cfg(feature = "parallel")]
    {
        if ctx.robots.len() >= PARALLEL_PLAN_THRESHOLD {
            return plan_tick_parallel(ctx);
        }
    }
    plan_tick_sequential(ctx)
}

/// Execute a scenario with the scripted (or no) negotiator.
pub fn run(scenario: &Scenario) -> Result<TrajectoryLog, EngineError> {
    match scenario.negotiator {
        NegotiatorKind::Llm => Err(EngineError::MissingChatClient),
        NegotiatorKind::Scripted => run_with(scenario, Negotiator::Scripted),
        NegotiatorKind::None => run_with(scenario, Negotiator::None),
    }
}

/// Execute a scenario whose negotiator is the live dialogue through `client`.
pub fn run_with_client(
    scenario: &Scenario,
    client: &dyn ChatClient,
) -> Result<TrajectoryLog, EngineError> {
    run_with(
        scenario,
        Negotiator::Llm {
            client,
            fallback: true,
        },
    )
}

/// Execute a scenario with an explicit negotiation backend.
pub fn run_with(scenario: &Scenario, negotiator: Negotiator<'_>) -> Result<TrajectoryLog, EngineError> {
    scenario.validate()?;
    let digest = digest64(
        serde_json::to_string(scenario)
            .expect("scenario serializes")
            .as_bytes(),
    );

    let mut robots: Vec<RobotState> = scenario
        .robots
        .iter()
        .map(|spec| {
            let aim = normalize_or_fallback(spec.goal - spec.start);
            RobotState {
                id: spec.id.clone(),
                position: spec.start,
                velocity: aim * spec.v_max,
                heading: aim.angle(),
                goal: spec.goal,
                priority: spec.priority,
                v_max: spec.v_max,
                mission: spec.mission.clone(),
                urgency: spec.urgency.clone(),
                arrived_at: None,
            }
        })
        .collect();
    // Id order everywhere: neighbor sums, triggers, and snapshots are then
    // independent of declaration order.
    robots.sort_by(|a, b| a.id.cmp(&b.id));

    let mut events = scenario.priority_events.clone();
    events.sort_by(|a, b| a.at_time.total_cmp(&b.at_time));

    let mut world = World {
        robots,
        time: 0.0,
        tick: 0,
        book: SessionBook::new(),
        coordinated: Default::default(),
        cooldown_until: BTreeMap::new(),
        pending: Vec::new(),
        records: Vec::new(),
        events_applied: 0,
    };

    // Robots already on their goals arrive at t = 0.
    for r in &mut world.robots {
        if r.position.distance(r.goal) <= scenario.goal_tolerance {
            r.arrived_at = Some(0.0);
            r.velocity = Vec2::ZERO;
        }
    }

    let mut snapshots = vec![snapshot_of(&world)];
    let total_ticks = (scenario.max_time / scenario.dt).round() as u64;

    while world.tick < total_ticks && !world.robots.iter().all(|r| !r.active()) {
        step(scenario, &mut world, &events, &negotiator)?;
        snapshots.push(snapshot_of(&world));
    }

    let arrivals: BTreeMap<String, f64> = world
        .robots
        .iter()
        .filter_map(|r| r.arrived_at.map(|t| (r.id.clone(), t)))
        .collect();
    let timed_out: Vec<String> = world
        .robots
        .iter()
        .filter(|r| r.active())
        .map(|r| r.id.clone())
        .collect();
    let final_priorities: BTreeMap<String, f64> = world
        .robots
        .iter()
        .map(|r| (r.id.clone(), r.priority))
        .collect();

    Ok(TrajectoryLog {
        format_version: LOG_FORMAT_VERSION,
        scenario_name: scenario.name.clone(),
        scenario_digest: digest,
        planner: scenario.planner.as_str().to_string(),
        negotiator: scenario.negotiator.as_str().to_string(),
        seed: scenario.seed,
        dt: scenario.dt,
        max_time: scenario.max_time,
        goal_tolerance: scenario.goal_tolerance,
        safe_distance: scenario.safe_distance,
        arena_radius: scenario.arena_radius,
        obstacles: scenario.obstacles.clone(),
        gap: scenario.gap,
        robots: world
            .robots
            .iter()
            .map(|r| {
                let spec = scenario
                    .robots
                    .iter()
                    .find(|s| s.id == r.id)
                    .expect("robot spec");
                RobotMeta {
                    id: r.id.clone(),
                    start: spec.start,
                    goal: spec.goal,
                }
            })
            .collect(),
        snapshots,
        arrivals,
        timed_out,
        negotiations: world.records,
        final_priorities,
    })
}

/// Advance the world by one tick. See the module docs for the phase order.
fn step(
    scenario: &Scenario,
    world: &mut World,
    events: &[crate::scenario::PriorityEvent],
    negotiator: &Negotiator<'_>,
) -> Result<(), EngineError> {
    let t_end = (world.tick + 1) as f64 * scenario.dt;

    // (1) scheduled priority changes due in (t, t_end]
    while world.events_applied < events.len() {
        let ev = &events[world.events_applied];
        if ev.at_time > world.time && ev.at_time <= t_end {
            for r in &mut world.robots {
                if let Some(rho) = ev.new_priorities.get(&r.id) {
                    r.priority = *rho;
                }
            }
            world.events_applied += 1;
        } else {
            break;
        }
    }

    // (2) negotiation outcomes whose simulated latency has elapsed
    let mut due: Vec<PendingResolution> = Vec::new();
    let mut still_pending: Vec<PendingResolution> = Vec::new();
    for p in world.pending.drain(..) {
        if p.due_tick <= world.tick {
            due.push(p);
        } else {
            still_pending.push(p);
        }
    }
    world.pending = still_pending;
    for resolution in due {
        apply_resolution(world, scenario, resolution);
    }

    // (3) collision triggers open sessions for newly conflicting pairs
    if !matches!(negotiator, Negotiator::None) {
        let horizon = scenario.prediction_horizon;
        let n = world.robots.len();
        let mut to_open: Vec<(usize, usize)> = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (&world.robots[i], &world.robots[j]);
                if !a.active() || !b.active() {
                    continue;
                }
                let key = pair_key(&a.id, &b.id);
                if world.book.is_open(&a.id, &b.id) {
                    continue;
                }
                if world
                    .cooldown_until
                    .get(&key)
                    .is_some_and(|&until| world.time < until)
                {
                    continue;
                }
                if collision_imminent(
                    a.position,
                    a.velocity,
                    b.position,
                    b.velocity,
                    scenario.safe_distance,
                    horizon,
                ) {
                    to_open.push((i, j));
                }
            }
        }
        for (i, j) in to_open {
            negotiate_pair(world, scenario, negotiator, i, j)?;
        }
    }

    // (4) plan all robots against the frozen snapshot
    let plans = {
        let ctx = TickContext {
            scenario,
            robots: &world.robots,
            coordinated: &world.coordinated,
            tick: world.tick,
        };
        plan_tick(&ctx)?
    };

    // (5) integrate, with wall blocking and arena clamping
    for (idx, plan) in plans {
        let robot = &mut world.robots[idx];
        let mut velocity = plan.velocity;
        let from = robot.position;
        let mut to = from + velocity * scenario.dt;
        if let Some(gap) = &scenario.gap {
            (to, velocity) = block_wall(gap, from, to, velocity);
        }
        if to.norm() > scenario.arena_radius {
            to = to * (scenario.arena_radius / to.norm());
            let outward = normalize_or_fallback(to);
            velocity -= outward * velocity.dot(outward);
        }
        robot.position = to;
        robot.velocity = velocity;
        robot.heading = heading_of(velocity, plan.heading);
    }

    world.tick += 1;
    world.time = t_end;

    // (6) arrivals freeze; a robot inside an obstacle aborts the run
    for r in &mut world.robots {
        if !r.active() {
            continue;
        }
        for obs in &scenario.obstacles {
            if r.position.distance(obs.center) < obs.radius - EPS_NORM {
                return Err(EngineError::InsideObstacle {
                    id: r.id.clone(),
                    time: world.time,
                    detail: "integration carried the robot across the boundary".to_string(),
                });
            }
        }
        if r.position.distance(r.goal) <= scenario.goal_tolerance {
            r.arrived_at = Some(world.time);
            r.velocity = Vec2::ZERO;
        }
    }

    Ok(())
}

fn negotiate_pair(
    world: &mut World,
    scenario: &Scenario,
    negotiator: &Negotiator<'_>,
    i: usize,
    j: usize,
) -> Result<(), EngineError> {
    let ctx_i = world.robots[i].mission_context();
    let ctx_j = world.robots[j].mission_context();
    let mut session = world.book.open_session(&ctx_i, &ctx_j, scenario.max_rounds)?;
    let opened_at = world.time;

    match negotiator {
        Negotiator::None => unreachable!("triggers are skipped without a negotiator"),
        Negotiator::Scripted => {
            let assignment = scripted_negotiate(&ctx_i, &ctx_j);
            session.outcome = Some(assignment.clone());
            let record = SessionRecord {
                pair: session.pair.clone(),
                opened_at,
                resolved_at: opened_at,
                mode: "scripted".to_string(),
                transcript: Vec::new(),
                outcome: assignment.clone(),
                fell_back: false,
            };
            // Zero simulated latency: the outcome lands this tick.
            apply_resolution(
                world,
                scenario,
                PendingResolution {
                    due_tick: world.tick,
                    assignment,
                    record,
                },
            );
        }
        Negotiator::Llm { client, fallback } => {
            let started = std::time::Instant::now();
            let outcome = llm_negotiate(&mut session, &ctx_i, &ctx_j, *client, *fallback)?;
            let elapsed = started.elapsed().as_secs_f64();
            let latency_ticks = (elapsed / scenario.dt).ceil() as u64;
            let resolved_at = opened_at + latency_ticks as f64 * scenario.dt;
            let record = SessionRecord {
                pair: session.pair.clone(),
                opened_at,
                resolved_at,
                mode: "llm".to_string(),
                transcript: session.transcript.clone(),
                outcome: outcome.clone(),
                fell_back: session.fell_back,
            };
            if latency_ticks == 0 {
                apply_resolution(
                    world,
                    scenario,
                    PendingResolution {
                        due_tick: world.tick,
                        assignment: outcome,
                        record,
                    },
                );
            } else {
                // Motion continues under the old priorities until the
                // dialogue would have finished.
                world.pending.push(PendingResolution {
                    due_tick: world.tick + latency_ticks,
                    assignment: outcome,
                    record,
                });
            }
        }
    }
    Ok(())
}

fn apply_resolution(world: &mut World, scenario: &Scenario, resolution: PendingResolution) {
    let mut priorities: BTreeMap<String, f64> = world
        .robots
        .iter()
        .map(|r| (r.id.clone(), r.priority))
        .collect();
    // Ids came from live robots, so this cannot fail.
    apply_assignment(&mut priorities, &resolution.assignment).expect("assignment ids exist");
    for r in &mut world.robots {
        r.priority = priorities[&r.id];
    }
    let key = resolution.record.pair.clone();
    world.coordinated.insert(key.clone());
    world
        .cooldown_until
        .insert(key.clone(), world.time + scenario.negotiation_cooldown);
    world.book.close(&key);
    world.records.push(resolution.record);
}

/// Stop motion at the wall line unless the crossing happens inside the
/// opening; blocked robots keep their lateral motion (they slide).
fn block_wall(gap: &crate::fields::WallGap, from: Vec2, to: Vec2, velocity: Vec2) -> (Vec2, Vec2) {
    let a = from.x - gap.wall_x;
    let b = to.x - gap.wall_x;
    if a == 0.0 || a.signum() == b.signum() {
        return (to, velocity);
    }
    let s = a / (a - b);
    let y_cross = from.y + (to.y - from.y) * s;
    if gap.within_opening(y_cross) {
        return (to, velocity);
    }
    // Hold just short of the wall on the approach side; slide in y.
    const STANDOFF: f64 = 1e-3;
    let blocked = Vec2::new(gap.wall_x + a.signum() * STANDOFF, to.y);
    (blocked, Vec2::new(0.0, velocity.y))
}

fn snapshot_of(world: &World) -> Snapshot {
    Snapshot {
        time: world.time,
        robots: world
            .robots
            .iter()
            .map(|r| RobotSnap {
                id: r.id.clone(),
                position: r.position,
                velocity: r.velocity,
                heading: r.heading,
                priority: r.priority,
                arrived: !r.active(),
            })
            .collect(),
        active_sessions: world
            .pending
            .iter()
            .map(|p| p.record.pair.clone())
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{make_circle_scenario, CircleOptions, NegotiatorKind, PlannerKind};
    use std::f64::consts::PI;

    fn free_space_pair(seed: u64) -> Scenario {
        make_circle_scenario(
            2,
            50.0,
            PI,
            seed,
            &CircleOptions {
                equal_priorities: Some(3.0),
                priority_event: false,
                ..CircleOptions::default()
            },
        )
    }

    #[test]
    fn lone_robot_goal_distance_strictly_decreases() {
        let scenario = make_circle_scenario(
            1,
            50.0,
            PI / 16.0,
            0,
            &CircleOptions {
                priority_event: false,
                ..CircleOptions::default()
            },
        );
        let log = run(&scenario).unwrap();
        let goal = scenario.robots[0].goal;
        let mut last = f64::INFINITY;
        for snap in &log.snapshots {
            let r = &snap.robots[0];
            if r.arrived {
                break;
            }
            let d = r.position.distance(goal);
            assert!(d < last, "distance should shrink monotonically");
            last = d;
        }
        assert_eq!(log.arrivals.len(), 1);
        // TTG within 2·dt of the kinematic optimum.
        let optimum = (100.0 - scenario.goal_tolerance) / 15.0;
        let ttg = log.arrivals["robot_1"];
        assert!((ttg - optimum).abs() <= 2.0 * scenario.dt + 1e-9, "ttg={ttg}");
    }

    #[test]
    fn arrived_world_is_a_fixed_point() {
        let scenario = free_space_pair(1);
        let log = run(&scenario).unwrap();
        assert!(log.timed_out.is_empty());
        // After the last arrival, no further snapshots exist: the loop
        // stops, so the final snapshot has everyone frozen.
        let last = log.snapshots.last().unwrap();
        assert!(last.robots.iter().all(|r| r.arrived));
        assert!(last.robots.iter().all(|r| r.velocity == Vec2::ZERO));
    }

    #[test]
    fn head_on_pair_arrives_with_clearance() {
        let scenario = free_space_pair(3);
        let log = run(&scenario).unwrap();
        assert!(log.timed_out.is_empty(), "timed out: {:?}", log.timed_out);
        let min_sep = log.min_pairwise_separation().unwrap();
        assert!(
            min_sep >= scenario.safe_distance,
            "pair passed at {min_sep:.3} m"
        );
    }

    #[test]
    fn priority_event_is_applied_once_in_its_window() {
        let mut scenario = free_space_pair(5);
        scenario.priority_events.push(crate::scenario::PriorityEvent {
            at_time: 1.0,
            new_priorities: [("robot_1".to_string(), 9.0), ("robot_2".to_string(), 1.0)]
                .into_iter()
                .collect(),
        });
        let log = run(&scenario).unwrap();
        let before: &Snapshot = log
            .snapshots
            .iter()
            .find(|s| (s.time - 0.95).abs() < 1e-9)
            .unwrap();
        let r1_before = before.robots.iter().find(|r| r.id == "robot_1").unwrap();
        // Negotiation may have bumped it, but the event value 9.0 only
        // appears from t=1.0 on.
        let after: &Snapshot = log
            .snapshots
            .iter()
            .find(|s| (s.time - 1.0).abs() < 1e-9)
            .unwrap();
        let r1_after = after.robots.iter().find(|r| r.id == "robot_1").unwrap();
        assert_eq!(r1_after.priority, 9.0);
        assert_ne!(r1_before.priority, 9.0);
    }

    #[test]
    fn wall_blocks_outside_the_opening() {
        let gap = crate::fields::WallGap {
            wall_x: 0.0,
            gap_center: Vec2::ZERO,
            gap_width: 0.5,
        };
        // Crossing far from the opening: blocked, slides in y.
        let (pos, vel) = block_wall(
            &gap,
            Vec2::new(-0.5, 10.0),
            Vec2::new(0.5, 10.2),
            Vec2::new(20.0, 4.0),
        );
        assert!(pos.x < 0.0);
        assert_eq!(vel, Vec2::new(0.0, 4.0));
        // Crossing through the opening: free.
        let (pos, vel) = block_wall(
            &gap,
            Vec2::new(-0.5, 0.1),
            Vec2::new(0.5, 0.05),
            Vec2::new(20.0, -1.0),
        );
        assert_eq!(pos, Vec2::new(0.5, 0.05));
        assert_eq!(vel, Vec2::new(20.0, -1.0));
    }

    #[test]
    fn scripted_runs_are_reproducible() {
        let scenario = make_circle_scenario(4, 50.0, PI / 16.0, 11, &CircleOptions::default());
        let a = run(&scenario).unwrap();
        let b = run(&scenario).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn robot_declaration_order_does_not_matter() {
        let mut scenario = make_circle_scenario(4, 50.0, PI / 16.0, 11, &CircleOptions::default());
        let log_sorted = run(&scenario).unwrap();
        scenario.robots.reverse();
        let log_reversed = run(&scenario).unwrap();
        // Digest differs (different scenario bytes) but the physics must
        // not: compare snapshots and arrivals.
        assert_eq!(log_sorted.snapshots, log_reversed.snapshots);
        assert_eq!(log_sorted.arrivals, log_reversed.arrivals);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_planning_agree_bitwise() {
        let scenario = make_circle_scenario(8, 50.0, PI / 16.0, 2, &CircleOptions::default());
        scenario.validate().unwrap();
        // Drive a fresh world a few ticks, comparing both paths each tick.
        let mut world_robots: Vec<RobotState> = scenario
            .robots
            .iter()
            .map(|spec| {
                let aim = normalize_or_fallback(spec.goal - spec.start);
                RobotState {
                    id: spec.id.clone(),
                    position: spec.start,
                    velocity: aim * spec.v_max,
                    heading: aim.angle(),
                    goal: spec.goal,
                    priority: spec.priority,
                    v_max: spec.v_max,
                    mission: spec.mission.clone(),
                    urgency: spec.urgency.clone(),
                    arrived_at: None,
                }
            })
            .collect();
        world_robots.sort_by(|a, b| a.id.cmp(&b.id));
        let coordinated = Default::default();
        for tick in 0..50 {
            let ctx = TickContext {
                scenario: &scenario,
                robots: &world_robots,
                coordinated: &coordinated,
                tick,
            };
            let seq = plan_tick_sequential(&ctx).unwrap();
            let par = plan_tick_parallel(&ctx).unwrap();
            assert_eq!(seq, par);
            for (idx, plan) in seq {
                let r = &mut world_robots[idx];
                r.position += plan.velocity * scenario.dt;
                r.velocity = plan.velocity;
                r.heading = plan.heading;
            }
        }
    }

    #[test]
    fn llm_negotiator_requires_a_client() {
        let mut scenario = free_space_pair(1);
        scenario.negotiator = NegotiatorKind::Llm;
        assert!(matches!(
            run(&scenario),
            Err(EngineError::MissingChatClient)
        ));
    }

    #[test]
    fn classical_apf_head_on_is_far_slower_than_the_tangential_field() {
        // The symmetric pair sits in the classical local minimum for a long
        // stall before numeric asymmetry lets it slip; either it times out
        // or it pays at least double the tangential planner's time.
        let faca = run(&free_space_pair(9)).unwrap();
        let faca_makespan = faca.arrivals.values().cloned().fold(0.0, f64::max);
        let mut scenario = free_space_pair(9);
        scenario.planner = PlannerKind::ClassicalApf;
        scenario.max_time = 30.0;
        let log = run(&scenario).unwrap();
        let apf_makespan = log
            .robot_ids()
            .map(|id| log.arrival_or_timeout(id))
            .fold(0.0, f64::max);
        assert!(
            !log.timed_out.is_empty() || apf_makespan >= 2.0 * faca_makespan,
            "apf {apf_makespan:.2}s vs faca {faca_makespan:.2}s"
        );
    }
}
