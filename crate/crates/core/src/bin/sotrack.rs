use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sotracker::commands::{
    cmd_eval, cmd_export_motion, cmd_simulate_scan, cmd_synth, cmd_track, load_suite_spec,
    report_table,
};
use sotracker::synth::SuiteSpec;
use sotracker::{Error, ObjectState, Point, RunConfig};

#[derive(Parser)]
#[command(
    name = "sotrack",
    version,
    about = "Model-free LiDAR single-object tracking"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (flat TOML); synth reads its suite spec from here.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Track every archive and write states, shape and diagnostics.
    Track {
        /// Archive directories, or directories containing archives.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Score tracking results against ground-truth archives.
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// Generate a synthetic benchmark suite.
    Synth {
        /// Number of tracklets, overriding the suite spec.
        #[arg(long)]
        tracklets: Option<usize>,
    },
    /// Per-frame motion, windowed displacement and deviation from ground truth.
    ExportMotion {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        result: PathBuf,
        #[arg(long, default_value_t = 30)]
        window: usize,
    },
    /// Depth-buffered scan of a stored shape at a new pose.
    SimulateScan {
        #[arg(long)]
        shape: PathBuf,
        /// x,y,z,theta of the state the shape is anchored at.
        #[arg(long, value_parser = parse4)]
        anchor: Option<[f64; 4]>,
        #[arg(long, value_parser = parse4)]
        pose: [f64; 4],
        #[arg(long, value_parser = parse3)]
        sensor: [f64; 3],
        #[arg(long, default_value_t = 0.01)]
        resolution: f64,
    },
}

fn parse_n<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|_| format!("expected {N} comma-separated numbers"))
}

fn parse3(s: &str) -> Result<[f64; 3], String> {
    parse_n::<3>(s)
}

fn parse4(s: &str) -> Result<[f64; 4], String> {
    parse_n::<4>(s)
}

fn state(v: [f64; 4]) -> Result<ObjectState, Error> {
    ObjectState::try_new(v[0], v[1], v[2], v[3])
}

fn run_config(g: &Global) -> Result<RunConfig, Error> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn output(g: &Global, default: &str) -> PathBuf {
    g.output.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn run(cli: Cli) -> Result<(), Error> {
    let g = &cli.global;
    match cli.command {
        Command::Track { inputs } => {
            let cfg = run_config(g)?;
            for s in cmd_track(&inputs, &cfg, &output(g, "results"), g.workers)? {
                println!("{} {} frames -> {}", s.id, s.frames, s.output.display());
            }
        }
        Command::Eval { results, gt } => {
            let cfg = run_config(g)?;
            let out = g.output.clone().unwrap_or_else(|| results.clone());
            let reports = cmd_eval(&results, &gt, &cfg, &out, g.workers)?;
            print!("{}", report_table(&reports));
        }
        Command::Synth { tracklets } => {
            let mut spec = match &g.config {
                Some(p) => load_suite_spec(p)?,
                None => SuiteSpec::default(),
            };
            if let Some(seed) = g.seed {
                spec.seed = seed;
            }
            if let Some(n) = tracklets {
                spec.tracklets = n;
            }
            let dirs = cmd_synth(&spec, &output(g, "suite"), g.workers)?;
            println!("{} archives written", dirs.len());
        }
        Command::ExportMotion {
            archive,
            result,
            window,
        } => {
            let out = g
                .output
                .clone()
                .unwrap_or_else(|| result.join("motion.json"));
            let export = cmd_export_motion(&archive, &result, window, &out)?;
            if export.clamped {
                eprintln!(
                    "sotrack: warning: window clamped to {} frames",
                    export.window
                );
            }
            println!("{} records -> {}", export.records.len(), out.display());
        }
        Command::SimulateScan {
            shape,
            anchor,
            pose,
            sensor,
            resolution,
        } => {
            let anchor = anchor.map(state).transpose()?;
            let out = output(g, "scan.bin");
            let scan = cmd_simulate_scan(
                &shape,
                anchor,
                state(pose)?,
                Point::new(sensor[0], sensor[1], sensor[2]),
                resolution,
                &out,
            )?;
            println!("{} points -> {}", scan.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("sotrack: {}: {}", e.class(), message);
            let code = match e {
                Error::Archive { .. }
                | Error::Config(_)
                | Error::InvalidInput(_)
                | Error::MissingIds(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
