//! Regenerates the bundled scenario files under `scenarios/`. Run from the
//! crate root with `cargo run -p faca-cli --example make_scenarios`.

use faca_core::formats::scenario_to_json;
use faca_core::scenario::{make_circle_scenario, CircleOptions};
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    fs::create_dir_all(&dir)?;

    let base = CircleOptions::default();
    let circle = |n| make_circle_scenario(n, 50.0, PI / 16.0, 0, &base);
    let gap = |n| {
        make_circle_scenario(
            n,
            50.0,
            PI / 16.0,
            0,
            &CircleOptions {
                gap_width: Some(0.5),
                ..base.clone()
            },
        )
    };
    let obstacle = |n| {
        make_circle_scenario(
            n,
            50.0,
            PI / 16.0,
            0,
            &CircleOptions {
                obstacle_radius: Some(3.0),
                ..base.clone()
            },
        )
    };

    for (name, scenario) in [
        ("circle_n4.json", circle(4)),
        ("circle_n8.json", circle(8)),
        ("gap_n4.json", gap(4)),
        ("gap_n8.json", gap(8)),
        ("obstacle_n4.json", obstacle(4)),
        ("obstacle_n8.json", obstacle(8)),
    ] {
        let path = dir.join(name);
        fs::write(&path, scenario_to_json(&scenario))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
