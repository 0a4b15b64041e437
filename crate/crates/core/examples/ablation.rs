//! Runs the loss-term and design-choice ablations on a synthetic suite and
//! prints mean accuracy and robustness per variant.
//!
//! `cargo run --release --example ablation -- [tracklets]`

use sotracker::commands::benchmark;
use sotracker::synth::{generate_suite, SuiteSpec};
use sotracker::{RunConfig, ShapeMode};

fn main() -> sotracker::Result<()> {
    let tracklets: usize = std::env::args()
        .nth(1)
        .map_or(10, |s| s.parse().expect("tracklet count"));
    let suite = generate_suite(&SuiteSpec {
        tracklets,
        ..SuiteSpec::default()
    })?;

    let full = RunConfig::default();
    let variants: Vec<(&str, RunConfig)> = vec![
        (
            "ICP+MP",
            RunConfig {
                w_shape: 0.0,
                w_mc: 0.0,
                ..full.clone()
            },
        ),
        (
            "ICP+MP+S(1)",
            RunConfig {
                w_mc: 0.0,
                shape_mode: ShapeMode::First,
                ..full.clone()
            },
        ),
        (
            "ICP+MP+S(All)",
            RunConfig {
                w_mc: 0.0,
                ..full.clone()
            },
        ),
        ("full", full.clone()),
        (
            "w/o ground removal",
            RunConfig {
                ground_removal: false,
                ..full.clone()
            },
        ),
        (
            "w/o RANSAC",
            RunConfig {
                ransac: false,
                ..full.clone()
            },
        ),
        (
            "w/o subshape",
            RunConfig {
                subshape_window: 0,
                ..full.clone()
            },
        ),
    ];

    println!("{:<20} {:>6} {:>6}", "variant", "acc", "rob");
    for (name, cfg) in variants {
        let run = benchmark(&suite, &cfg, 1)?;
        let all = &run.reports[0];
        println!("{name:<20} {:>6.3} {:>6.3}", all.acc, all.rob);
    }
    Ok(())
}
