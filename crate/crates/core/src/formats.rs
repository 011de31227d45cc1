//! On-disk formats: scenario and log JSON, the per-step trajectory CSV,
//! metrics report JSON, and deterministic SVG rendering of trajectories.
//! Everything here is bytes-in/bytes-out; file placement belongs to the
//! shell.

use crate::log::TrajectoryLog;
use crate::metrics::MetricsReport;
use crate::scenario::Scenario;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Validation(#[from] crate::scenario::ScenarioError),
}

/// 64-bit FNV-1a digest, hex-encoded. Stable, dependency-free content
/// fingerprint for scenarios and logs.
pub fn digest64(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    format!("{h:016x}")
}

pub fn scenario_to_json(scenario: &Scenario) -> String {
    serde_json::to_string_pretty(scenario).expect("scenario serializes")
}

/// Parse and validate a scenario; validation failures name the field.
pub fn scenario_from_json(text: &str) -> Result<Scenario, FormatError> {
    let scenario: Scenario = serde_json::from_str(text)?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn log_to_json(log: &TrajectoryLog) -> String {
    serde_json::to_string_pretty(log).expect("log serializes")
}

pub fn log_from_json(text: &str) -> Result<TrajectoryLog, FormatError> {
    Ok(serde_json::from_str(text)?)
}

pub fn report_to_json(report: &MetricsReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

/// Per-step trajectory records, one row per robot per tick.
pub fn trajectory_csv(log: &TrajectoryLog) -> String {
    let mut out = String::from("t,id,x,y,vx,vy,heading,priority\n");
    for snap in &log.snapshots {
        for r in &snap.robots {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                snap.time,
                r.id,
                r.position.x,
                r.position.y,
                r.velocity.x,
                r.velocity.y,
                r.heading,
                r.priority
            )
            .expect("string write");
        }
    }
    out
}

/// Dialogue transcripts as line-delimited JSON: one message object per
/// line, with session boundaries carried by the `pair` and `turn` fields,
/// followed by one outcome object per session.
pub fn transcripts_jsonl(log: &TrajectoryLog) -> String {
    let mut out = String::new();
    for session in &log.negotiations {
        for (turn, entry) in session.transcript.iter().enumerate() {
            let line = serde_json::json!({
                "kind": "message",
                "pair": [session.pair.0, session.pair.1],
                "opened_at": session.opened_at,
                "turn": turn,
                "speaker": entry.speaker,
                "text": entry.text,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        let outcome = serde_json::json!({
            "kind": "outcome",
            "pair": [session.pair.0, session.pair.1],
            "opened_at": session.opened_at,
            "resolved_at": session.resolved_at,
            "mode": session.mode,
            "fell_back": session.fell_back,
            "high": session.outcome.high,
            "low": session.outcome.low,
            "new_priorities": session.outcome.new_priorities,
        });
        out.push_str(&outcome.to_string());
        out.push('\n');
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// Render a log as a standalone SVG: one polyline per robot, circles for
/// obstacles, wall segments, a filled dot at each start and a hollow
/// square at each goal. Output bytes are a pure function of the log.
pub fn render_svg(log: &TrajectoryLog) -> String {
    let r = log.arena_radius;
    let pad = r * 0.08;
    let size = 2.0 * (r + pad);
    let mut svg = String::new();
    // World y points up; flip into SVG screen coordinates.
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {size} {size}" width="720" height="720">"#
    )
    .unwrap();
    writeln!(
        svg,
        r#"<g transform="translate({c},{c}) scale(1,-1)">"#,
        c = r + pad
    )
    .unwrap();
    writeln!(
        svg,
        r##"<circle cx="0" cy="0" r="{r}" fill="#fcfcfc" stroke="#999" stroke-width="0.3"/>"##
    )
    .unwrap();

    for obs in &log.obstacles {
        writeln!(
            svg,
            r##"<circle cx="{}" cy="{}" r="{}" fill="#d9d9d9" stroke="#555" stroke-width="0.25"/>"##,
            obs.center.x, obs.center.y, obs.radius
        )
        .unwrap();
    }
    if let Some(gap) = &log.gap {
        let half = gap.gap_width / 2.0;
        let top = gap.gap_center.y + half;
        let bottom = gap.gap_center.y - half;
        writeln!(
            svg,
            r##"<line x1="{x}" y1="{top}" x2="{x}" y2="{size}" stroke="#333" stroke-width="0.5"/>"##,
            x = gap.wall_x,
            size = r + pad,
        )
        .unwrap();
        writeln!(
            svg,
            r##"<line x1="{x}" y1="{bottom}" x2="{x}" y2="-{size}" stroke="#333" stroke-width="0.5"/>"##,
            x = gap.wall_x,
            size = r + pad,
        )
        .unwrap();
    }

    for (k, meta) in log.robots.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut points = String::new();
        for snap in &log.snapshots {
            if let Some(rs) = snap.robots.iter().find(|r| r.id == meta.id) {
                if rs.arrived && snap.time > log.arrival_or_timeout(&meta.id) {
                    break;
                }
                write!(points, "{},{} ", rs.position.x, rs.position.y).unwrap();
            }
        }
        writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="0.35" stroke-opacity="0.9"/>"#,
            points.trim_end()
        )
        .unwrap();
        writeln!(
            svg,
            r#"<circle cx="{}" cy="{}" r="0.9" fill="{color}"/>"#,
            meta.start.x, meta.start.y
        )
        .unwrap();
        writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="1.6" height="1.6" fill="none" stroke="{color}" stroke-width="0.35"/>"#,
            meta.goal.x - 0.8,
            meta.goal.y - 0.8
        )
        .unwrap();
    }

    svg.push_str("</g>\n</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{make_circle_scenario, CircleOptions};
    use std::f64::consts::PI;

    #[test]
    fn digest_is_stable_and_input_sensitive() {
        assert_eq!(digest64(b""), "cbf29ce484222325");
        assert_eq!(digest64(b"a"), digest64(b"a"));
        assert_ne!(digest64(b"a"), digest64(b"b"));
    }

    #[test]
    fn scenario_json_round_trips_byte_stable() {
        let s = make_circle_scenario(4, 50.0, PI / 16.0, 9, &CircleOptions::default());
        let json = scenario_to_json(&s);
        let back = scenario_from_json(&json).unwrap();
        assert_eq!(scenario_to_json(&back), json);
    }

    #[test]
    fn scenario_parse_rejects_invalid_fields() {
        let s = make_circle_scenario(2, 50.0, PI, 1, &CircleOptions::default());
        let mut json: serde_json::Value = serde_json::from_str(&scenario_to_json(&s)).unwrap();
        json["dt"] = serde_json::json!(0.0);
        let err = scenario_from_json(&json.to_string()).unwrap_err();
        assert!(err.to_string().contains("dt"), "{err}");
    }

    #[test]
    fn log_round_trip_and_artifacts() {
        let s = make_circle_scenario(
            4,
            50.0,
            PI / 16.0,
            5,
            &CircleOptions {
                gap_width: Some(0.5),
                obstacle_radius: None,
                max_time: 3.0, // keep the fixture small
                ..CircleOptions::default()
            },
        );
        let log = crate::engine::run(&s).unwrap();
        let json = log_to_json(&log);
        let back = log_from_json(&json).unwrap();
        assert_eq!(log_to_json(&back), json);

        let csv = trajectory_csv(&log);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,id,x,y,vx,vy,heading,priority");
        let rows = csv.lines().count() - 1;
        assert_eq!(rows, log.snapshots.len() * 4);

        let svg = render_svg(&log);
        assert_eq!(svg.matches("<polyline").count(), 4);
        // 4 start dots + arena circle; obstacle circles would add more.
        assert_eq!(svg.matches("<circle").count(), 5);
        assert_eq!(svg.matches("<rect").count(), 4);
        assert_eq!(svg.matches("<line").count(), 2);
        // Deterministic bytes.
        assert_eq!(render_svg(&log), svg);
    }

    #[test]
    fn obstacle_log_renders_its_circle() {
        let s = make_circle_scenario(
            2,
            50.0,
            PI / 16.0,
            5,
            &CircleOptions {
                obstacle_radius: Some(3.0),
                max_time: 1.0,
                ..CircleOptions::default()
            },
        );
        let log = crate::engine::run(&s).unwrap();
        let svg = render_svg(&log);
        // Arena + obstacle + 2 starts.
        assert_eq!(svg.matches("<circle").count(), 4);
    }
}
