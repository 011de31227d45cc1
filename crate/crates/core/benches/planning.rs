//! Parallel vs sequential planning throughput, and whole-run batch
//! execution both ways. Run with `cargo bench -p faca-core`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use faca_core::engine::{plan_tick_parallel, plan_tick_sequential, run, TickContext};
use faca_core::scenario::{make_circle_scenario, CircleOptions};
use faca_core::RobotState;
use faca_core::Vec2;
use std::f64::consts::PI;
use std::hint::black_box;

/// Mid-flight world state: every robot a third of the way to its goal, so
/// the pairwise terms all fire.
fn mid_flight_robots(n: usize) -> (faca_core::Scenario, Vec<RobotState>) {
    let scenario = make_circle_scenario(n, 50.0, PI / 16.0, 7, &CircleOptions::default());
    let mut robots: Vec<RobotState> = scenario
        .robots
        .iter()
        .map(|spec| {
            let dir = faca_core::geometry::normalize_or_fallback(spec.goal - spec.start);
            RobotState {
                id: spec.id.clone(),
                position: spec.start + (spec.goal - spec.start) * 0.33,
                velocity: dir * spec.v_max,
                heading: dir.angle(),
                goal: spec.goal,
                priority: spec.priority,
                v_max: spec.v_max,
                mission: spec.mission.clone(),
                urgency: spec.urgency.clone(),
                arrived_at: None,
            }
        })
        .collect();
    robots.sort_by(|a, b| a.id.cmp(&b.id));
    (scenario, robots)
}

fn bench_tick(c: &mut Criterion) {
    let mut group = c.benchmark_group("plan_tick");
    for n in [8usize, 32, 128] {
        let (scenario, robots) = mid_flight_robots(n);
        let coordinated = Default::default();
        let ctx = TickContext {
            scenario: &scenario,
            robots: &robots,
            coordinated: &coordinated,
            tick: 100,
        };
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| black_box(plan_tick_sequential(black_box(&ctx)).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
            b.iter(|| black_box(plan_tick_parallel(black_box(&ctx)).unwrap()))
        });
    }
    group.finish();
}

fn bench_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("seed_batch_n4_x16");
    group.sample_size(10);
    let scenarios: Vec<_> = (0..16u64)
        .map(|seed| {
            make_circle_scenario(
                4,
                50.0,
                PI / 16.0,
                seed,
                &CircleOptions {
                    max_time: 13.0,
                    ..CircleOptions::default()
                },
            )
        })
        .collect();
    group.bench_function("sequential", |b| {
        b.iter(|| {
            for s in &scenarios {
                black_box(run(black_box(s)).unwrap());
            }
        })
    });
    group.bench_function("parallel_rayon", |b| {
        use rayon::prelude::*;
        b.iter(|| {
            let logs: Vec<_> = scenarios
                .par_iter()
                .map(|s| run(s).unwrap())
                .collect();
            black_box(logs)
        })
    });
    group.finish();
}

fn sanity(c: &mut Criterion) {
    // Cheap guard that both paths agree before timing them.
    let (scenario, robots) = mid_flight_robots(8);
    let coordinated = Default::default();
    let ctx = TickContext {
        scenario: &scenario,
        robots: &robots,
        coordinated: &coordinated,
        tick: 3,
    };
    assert_eq!(
        plan_tick_sequential(&ctx).unwrap(),
        plan_tick_parallel(&ctx).unwrap()
    );
    c.bench_function("noop_guard", |b| b.iter(|| black_box(Vec2::ZERO)));
}

criterion_group!(benches, sanity, bench_tick, bench_batch);
criterion_main!(benches);
