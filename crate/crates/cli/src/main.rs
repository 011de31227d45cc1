use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use faca_cli::{compare, comparison_table, parse_seeds, render, run_batch, run_once, LlmConfig, RunConfig};
use faca_core::scenario::{NegotiatorKind, PlannerKind};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

#[derive(Parser)]
#[command(
    name = "faca",
    about = "Deterministic 2D multi-robot collision-avoidance simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario's planner (faca | classical_apf | mpc).
    #[arg(long, value_parser = PlannerKind::from_str)]
    planner: Option<PlannerKind>,
    /// Override the scenario's negotiator (none | scripted | llm).
    #[arg(long, value_parser = NegotiatorKind::from_str)]
    negotiator: Option<NegotiatorKind>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Chat-completions endpoint for the llm negotiator.
    #[arg(long, default_value = "http://127.0.0.1:8080/v1/chat/completions")]
    llm_url: String,
    /// Model name sent to the endpoint.
    #[arg(long, default_value = "gpt-4o-mini")]
    llm_model: String,
    /// Request timeout in milliseconds.
    #[arg(long, default_value_t = 10_000)]
    llm_timeout_ms: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario once and write its artifacts.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Seed override for this run.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Execute a scenario across a seed list and aggregate the metrics.
    Batch {
        #[command(flatten)]
        common: CommonArgs,
        /// Seed list: a half-open range `0..100` or comma-separated values.
        #[arg(long, default_value = "0..100")]
        seeds: String,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Run several planners over the same seeds and tabulate the metrics.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated planners (at least two).
        #[arg(long, value_delimiter = ',', value_parser = PlannerKind::from_str)]
        planners: Vec<PlannerKind>,
        /// Comma-separated negotiator modes for the table rows.
        #[arg(long, value_delimiter = ',', default_value = "scripted,none", value_parser = NegotiatorKind::from_str)]
        negotiators: Vec<NegotiatorKind>,
        #[arg(long, default_value = "0..100")]
        seeds: String,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Also write every run's artifacts under the output directory.
        #[arg(long)]
        keep_logs: bool,
    },
    /// Render a stored trajectory log to SVG.
    Render {
        /// Trajectory log JSON file.
        #[arg(long)]
        log: PathBuf,
        /// Output SVG path.
        #[arg(long, default_value = "trajectories.svg")]
        out: PathBuf,
    },
}

fn config_from(common: &CommonArgs, seeds: Vec<u64>, jobs: Option<usize>) -> RunConfig {
    RunConfig {
        scenario_path: common.scenario.clone(),
        planner: common.planner,
        negotiator: common.negotiator,
        seeds,
        out_dir: common.out.clone(),
        jobs,
        keep_logs: false,
        llm: LlmConfig {
            url: common.llm_url.clone(),
            model: common.llm_model.clone(),
            timeout: Duration::from_millis(common.llm_timeout_ms),
        },
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { common, seed } => {
            let config = config_from(&common, seed.into_iter().collect(), None);
            let report = run_once(&config)?;
            println!("wrote artifacts to {}", config.out_dir.display());
            println!("{}", faca_core::formats::report_to_json(&report));
        }
        Command::Batch {
            common,
            seeds,
            jobs,
        } => {
            let config = config_from(&common, parse_seeds(&seeds)?, Some(jobs));
            let summary = run_batch(&config)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Compare {
            common,
            planners,
            negotiators,
            seeds,
            jobs,
            keep_logs,
        } => {
            let mut config = config_from(&common, parse_seeds(&seeds)?, Some(jobs));
            config.keep_logs = keep_logs;
            let comparison = compare(&config, &planners, &negotiators)?;
            print!("{}", comparison_table(&comparison));
        }
        Command::Render { log, out } => {
            render(&log, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
