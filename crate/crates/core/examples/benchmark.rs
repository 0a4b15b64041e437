//! Runs the tracker over the synthetic benchmark suite and prints the
//! accuracy/robustness table, one row per configuration.
//!
//! `cargo run --release --example benchmark -- [--suite suite.toml] [tracklets] [config.toml...]`

use std::path::Path;
use std::time::Instant;

use sotracker::commands::{benchmark, load_suite_spec, report_table};
use sotracker::synth::{generate_suite, SuiteSpec};
use sotracker::RunConfig;

fn main() -> sotracker::Result<()> {
    let mut args = std::env::args().skip(1).peekable();
    let mut spec = SuiteSpec::default();
    if args.peek().map(String::as_str) == Some("--suite") {
        args.next();
        spec = load_suite_spec(Path::new(&args.next().expect("suite spec path")))?;
    }
    if let Some(n) = args.next() {
        spec.tracklets = n.parse().expect("tracklet count");
    }
    let configs: Vec<(String, RunConfig)> = {
        let files: Vec<String> = args.collect();
        if files.is_empty() {
            vec![("full".into(), RunConfig::default())]
        } else {
            files
                .iter()
                .map(|f| Ok((f.clone(), RunConfig::load(Path::new(f))?)))
                .collect::<sotracker::Result<_>>()?
        }
    };

    let t0 = Instant::now();
    let suite = generate_suite(&spec)?;
    let frames: usize = suite.iter().map(|t| t.len()).sum();
    println!(
        "suite: {} tracklets, {frames} frames, generated in {:.1?}",
        suite.len(),
        t0.elapsed()
    );

    for (name, cfg) in configs {
        let t0 = Instant::now();
        let run = benchmark(&suite, &cfg, 1)?;
        println!("\n{name}: {:.1?}", t0.elapsed());
        print!("{}", report_table(&run.reports));
        for s in &run.reports[0].per_tracklet {
            println!(
                "  {} {:>6} frames={} acc={:.3} rob={:.3}",
                s.id,
                s.difficulty.label(),
                s.frames,
                s.acc,
                s.rob
            );
        }
    }
    Ok(())
}
