//! End-to-end file pipeline: writes a small synthetic suite as archives,
//! tracks every archive into a results directory and scores the results
//! against the archived ground truth.
//!
//! `cargo run --release --example evaluate -- [tracklets] [workdir]`

use std::path::PathBuf;

use sotracker::commands::{cmd_eval, cmd_synth, cmd_track, report_table};
use sotracker::synth::SuiteSpec;
use sotracker::RunConfig;

fn main() -> sotracker::Result<()> {
    let mut args = std::env::args().skip(1);
    let tracklets: usize = args
        .next()
        .map_or(4, |s| s.parse().expect("tracklet count"));
    let work = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("sotrack-evaluate"));
    let (suite, results) = (work.join("suite"), work.join("results"));

    let spec = SuiteSpec {
        tracklets,
        ..SuiteSpec::default()
    };
    let dirs = cmd_synth(&spec, &suite, 1)?;
    println!("{} archives in {}", dirs.len(), suite.display());

    let cfg = RunConfig::default();
    for s in cmd_track(&[suite.clone()], &cfg, &results, 1)? {
        println!("tracked {} ({} frames)", s.id, s.frames);
    }
    let reports = cmd_eval(&results, &suite, &cfg, &results, 1)?;
    print!("{}", report_table(&reports));
    Ok(())
}
