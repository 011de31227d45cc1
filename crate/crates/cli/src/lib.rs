//! Run configuration and batch execution behind the `faca` binary: scenario
//! loading, per-seed runs, aggregation, planner comparison tables, and
//! artifact writing. Kept as a library so the pieces are testable without
//! spawning the binary.

use anyhow::{bail, Context, Result};
use faca_core::formats;
use faca_core::metrics::{self, MetricsReport};
use faca_core::negotiation::client::HttpChatClient;
use faca_core::scenario::{NegotiatorKind, PlannerKind, Scenario};
use faca_core::TrajectoryLog;
use rayon::prelude::*;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

/// Everything a run needs beyond the scenario file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario_path: PathBuf,
    pub planner: Option<PlannerKind>,
    pub negotiator: Option<NegotiatorKind>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub jobs: Option<usize>,
    /// Persist per-seed logs during `compare` (batches always persist).
    pub keep_logs: bool,
    pub llm: LlmConfig,
}

#[derive(Debug, Clone)]
pub struct LlmConfig {
    pub url: String,
    pub model: String,
    pub timeout: Duration,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            url: "http://127.0.0.1:8080/v1/chat/completions".to_string(),
            model: "gpt-4o-mini".to_string(),
            timeout: Duration::from_millis(10_000),
        }
    }
}

/// Parse and validate a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read scenario file {}", path.display()))?;
    formats::scenario_from_json(&text)
        .with_context(|| format!("invalid scenario {}", path.display()))
}

fn apply_overrides(
    mut scenario: Scenario,
    planner: Option<PlannerKind>,
    negotiator: Option<NegotiatorKind>,
    seed: Option<u64>,
) -> Scenario {
    if let Some(p) = planner {
        scenario.planner = p;
    }
    if let Some(n) = negotiator {
        scenario.negotiator = n;
    }
    if let Some(s) = seed {
        scenario.seed = s;
    }
    scenario
}

fn execute(scenario: &Scenario, llm: &LlmConfig) -> Result<TrajectoryLog> {
    let log = match scenario.negotiator {
        NegotiatorKind::Llm => {
            let client = HttpChatClient::new(llm.url.clone(), llm.model.clone(), llm.timeout);
            faca_core::run_with_client(scenario, &client)?
        }
        _ => faca_core::run(scenario)?,
    };
    Ok(log)
}

/// Write every artifact of one run into `dir`.
pub fn write_run_artifacts(dir: &Path, log: &TrajectoryLog) -> Result<MetricsReport> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("log.json"), formats::log_to_json(log))?;
    fs::write(dir.join("trajectory.csv"), formats::trajectory_csv(log))?;
    fs::write(dir.join("transcripts.jsonl"), formats::transcripts_jsonl(log))?;
    let report = metrics::report(log);
    fs::write(dir.join("metrics.json"), formats::report_to_json(&report))?;
    Ok(report)
}

/// Run a scenario once and write its artifacts.
pub fn run_once(config: &RunConfig) -> Result<MetricsReport> {
    let scenario = load_scenario(&config.scenario_path)?;
    let scenario = apply_overrides(
        scenario,
        config.planner,
        config.negotiator,
        config.seeds.first().copied(),
    );
    let log = execute(&scenario, &config.llm)?;
    let report = write_run_artifacts(&config.out_dir, &log)?;
    Ok(report)
}

/// Mean and (population) standard deviation over per-seed values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    pub stddev: f64,
}

fn aggregate(values: &[f64]) -> Option<Aggregate> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(Aggregate {
        mean,
        stddev: var.sqrt(),
    })
}

/// Batch summary across seeds.
#[derive(Debug, Clone, Serialize)]
pub struct BatchReport {
    pub scenario_name: String,
    pub planner: String,
    pub negotiator: String,
    pub seeds: Vec<u64>,
    pub ttg: Option<Aggregate>,
    pub mmd_robot: Option<Aggregate>,
    pub mmd_obstacle: Option<Aggregate>,
    pub flow_rate: Option<Aggregate>,
    /// Fraction of complete runs whose arrival order matched priorities.
    pub fairness_rate: Option<f64>,
    pub timed_out_runs: usize,
}

fn summarize(
    scenario: &Scenario,
    seeds: &[u64],
    reports: &[MetricsReport],
) -> BatchReport {
    let ttg: Vec<f64> = reports.iter().map(|r| r.ttg_mean).collect();
    let mmd: Vec<f64> = reports.iter().filter_map(|r| r.mmd_robot).collect();
    let mmd_obs: Vec<f64> = reports.iter().filter_map(|r| r.mmd_obstacle).collect();
    let fr: Vec<f64> = reports.iter().filter_map(|r| r.flow_rate).collect();
    let fairness: Vec<bool> = reports.iter().filter_map(|r| r.fairness_match).collect();
    BatchReport {
        scenario_name: scenario.name.clone(),
        planner: scenario.planner.as_str().to_string(),
        negotiator: scenario.negotiator.as_str().to_string(),
        seeds: seeds.to_vec(),
        ttg: aggregate(&ttg),
        mmd_robot: aggregate(&mmd),
        mmd_obstacle: aggregate(&mmd_obs),
        flow_rate: aggregate(&fr),
        fairness_rate: (!fairness.is_empty())
            .then(|| fairness.iter().filter(|&&b| b).count() as f64 / fairness.len() as f64),
        timed_out_runs: reports.iter().filter(|r| !r.timeout_ids.is_empty()).count(),
    }
}

fn run_seeds(
    scenario: &Scenario,
    seeds: &[u64],
    llm: &LlmConfig,
    jobs: Option<usize>,
    out_dir: Option<&Path>,
) -> Result<Vec<MetricsReport>> {
    let worker = |&seed: &u64| -> Result<MetricsReport> {
        let s = scenario.with_seed(seed);
        let log = execute(&s, llm)?;
        match out_dir {
            Some(dir) => write_run_artifacts(&dir.join(format!("seed_{seed:04}")), &log),
            None => Ok(metrics::report(&log)),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("building thread pool")?;
    pool.install(|| seeds.par_iter().map(worker).collect())
}

/// Run a scenario across all configured seeds, write per-seed artifacts and
/// the aggregate. Timeouts are data; only hard failures error.
pub fn run_batch(config: &RunConfig) -> Result<BatchReport> {
    if config.seeds.is_empty() {
        bail!("seed list must not be empty");
    }
    let scenario = load_scenario(&config.scenario_path)?;
    let scenario = apply_overrides(scenario, config.planner, config.negotiator, None);
    let reports = run_seeds(
        &scenario,
        &config.seeds,
        &config.llm,
        config.jobs,
        Some(&config.out_dir),
    )?;
    let summary = summarize(&scenario, &config.seeds, &reports);
    fs::create_dir_all(&config.out_dir)?;
    fs::write(
        config.out_dir.join("aggregate.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}

/// One row of the comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub planner: String,
    pub negotiator: String,
    pub ttg_mean: f64,
    pub mmd_mean: Option<f64>,
    pub flow_rate_mean: Option<f64>,
    pub timed_out_runs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub scenario_name: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<ComparisonRow>,
}

/// Run every (planner × negotiator) combination over the seed list and
/// collect the mean metrics, one row each.
pub fn compare(
    config: &RunConfig,
    planners: &[PlannerKind],
    negotiators: &[NegotiatorKind],
) -> Result<Comparison> {
    if planners.len() < 2 {
        bail!("compare needs at least two planners");
    }
    if config.seeds.is_empty() {
        bail!("seed list must not be empty");
    }
    let base = load_scenario(&config.scenario_path)?;
    let mut rows = Vec::new();
    for &planner in planners {
        for &negotiator in negotiators {
            let scenario = apply_overrides(base.clone(), Some(planner), Some(negotiator), None);
            let combo_dir = config
                .out_dir
                .join(format!("{}_{}", planner.as_str(), negotiator.as_str()));
            let reports = run_seeds(
                &scenario,
                &config.seeds,
                &config.llm,
                config.jobs,
                config.keep_logs.then_some(combo_dir.as_path()),
            )?;
            let summary = summarize(&scenario, &config.seeds, &reports);
            rows.push(ComparisonRow {
                planner: planner.as_str().to_string(),
                negotiator: negotiator.as_str().to_string(),
                ttg_mean: summary.ttg.map(|a| a.mean).unwrap_or(f64::NAN),
                mmd_mean: summary.mmd_robot.map(|a| a.mean),
                flow_rate_mean: summary.flow_rate.map(|a| a.mean),
                timed_out_runs: summary.timed_out_runs,
            });
        }
    }
    let comparison = Comparison {
        scenario_name: base.name.clone(),
        seeds: config.seeds.clone(),
        rows,
    };
    fs::create_dir_all(&config.out_dir)?;
    fs::write(
        config.out_dir.join("comparison.json"),
        serde_json::to_string_pretty(&comparison)?,
    )?;
    fs::write(config.out_dir.join("table.txt"), comparison_table(&comparison))?;
    Ok(comparison)
}

/// Fixed-width text table, planners × negotiator modes against the metric
/// columns.
pub fn comparison_table(c: &Comparison) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "scenario: {} ({} seeds)\n",
        c.scenario_name,
        c.seeds.len()
    ));
    out.push_str(&format!(
        "{:<16}{:<12}{:>10}{:>10}{:>10}{:>10}\n",
        "planner", "negotiator", "TTG", "MMD", "FR", "timeouts"
    ));
    for row in &c.rows {
        let fmt_opt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.2}"),
            None => "-".to_string(),
        };
        out.push_str(&format!(
            "{:<16}{:<12}{:>10.2}{:>10}{:>10}{:>10}\n",
            row.planner,
            row.negotiator,
            row.ttg_mean,
            fmt_opt(row.mmd_mean),
            fmt_opt(row.flow_rate_mean),
            row.timed_out_runs
        ));
    }
    out
}

/// Render a stored log to SVG.
pub fn render(log_path: &Path, out_path: &Path) -> Result<()> {
    let text = fs::read_to_string(log_path)
        .with_context(|| format!("cannot read log {}", log_path.display()))?;
    let log = formats::log_from_json(&text)?;
    fs::write(out_path, formats::render_svg(&log))?;
    Ok(())
}

/// Parse a seed list: `0..100` (half-open range) or comma-separated values.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u64 = lo.trim().parse().context("bad range start")?;
        let hi: u64 = hi.trim().parse().context("bad range end")?;
        if hi <= lo {
            bail!("empty seed range {spec}");
        }
        Ok((lo..hi).collect())
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<u64>().context("bad seed"))
            .collect()
    }
}
