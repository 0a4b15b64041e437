//! Command implementations behind the `sotrack` binary, usable as a library.
//!
//! Tracklets are processed concurrently on a pool of `workers` threads; each
//! tracklet is handled by one thread.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::{to_local, Frame, Point, PointCloud, Tracklet};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{
    list_archives, read_points, read_states, write_archive, write_diagnostics, write_json,
    write_points, ArchiveReader, StatesWriter, DIAGNOSTICS, SHAPE, STATES,
};
use crate::metrics::{
    chamfer_with_voxel, frame_ious, initial_point_density, split_reports, Difficulty, EvalInput,
    EvalReport,
};
use crate::motion::{export_motion, MotionExport};
use crate::state::ObjectState;
use crate::synth::{generate_suite_entry, simulate_scan, SuiteSpec};
use crate::tracker::{track, TrackResult, Tracker};

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrackSummary {
    pub id: String,
    pub frames: usize,
    pub shape_points: usize,
    pub output: PathBuf,
}

/// Tracks one archive, reading each frame only after the previous state has
/// been written.
pub fn track_archive(dir: &Path, cfg: &RunConfig, output: &Path) -> Result<TrackSummary> {
    let reader = ArchiveReader::open(dir)?;
    let id = reader.manifest.id.clone();
    let out = output.join(&id);
    create_dir(&out)?;
    let first = reader.frame(1)?;
    let mut tracker = Tracker::new(
        &first,
        &reader.manifest.first_box,
        cfg.tracker(),
        cfg.solver(),
        cfg.weights(),
    )
    .map_err(|e| match e {
        Error::UntrackableInitialization => Error::InvalidInput(format!(
            "{}: no points inside the first-frame box",
            dir.display()
        )),
        other => other,
    })?;
    let mut states = StatesWriter::create(&out.join(STATES))?;
    for k in 2..=reader.len() {
        let frame = reader.frame(k)?;
        let state = tracker.step(&frame);
        states.write(k, &state)?;
    }
    let result = tracker.finish();
    write_points(&out.join(SHAPE), &result.shape)?;
    write_diagnostics(&out.join(DIAGNOSTICS), &result.diagnostics)?;
    Ok(TrackSummary {
        id,
        frames: reader.len(),
        shape_points: result.shape.len(),
        output: out,
    })
}

fn collect_archives(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for input in inputs {
        let found = list_archives(input)?;
        if found.is_empty() {
            return Err(Error::InvalidInput(format!(
                "no tracklet archives under {}",
                input.display()
            )));
        }
        dirs.extend(found);
    }
    Ok(dirs)
}

pub fn cmd_track(
    inputs: &[PathBuf],
    cfg: &RunConfig,
    output: &Path,
    workers: usize,
) -> Result<Vec<TrackSummary>> {
    let dirs = collect_archives(inputs)?;
    create_dir(output)?;
    pool(workers)?.install(|| {
        dirs.par_iter()
            .map(|d| track_archive(d, cfg, output))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    })
}

/// Scores one tracklet. The first frame counts with its given state.
pub fn score_tracklet(
    tracklet: &Tracklet,
    estimated: &[ObjectState],
    shape: Option<&PointCloud>,
    voxel: f64,
) -> Result<EvalInput> {
    let gt = tracklet.gt_boxes().ok_or_else(|| {
        Error::InvalidInput(format!(
            "tracklet {} has no ground-truth states",
            tracklet.id
        ))
    })?;
    let ious = frame_ious(estimated, &gt)?;
    let shape_cd = match (shape, &tracklet.gt_shape) {
        (Some(s), Some(g)) if !s.is_empty() && !g.is_empty() => {
            Some(chamfer_with_voxel(s, g, voxel)?)
        }
        _ => None,
    };
    Ok(EvalInput {
        id: tracklet.id.clone(),
        difficulty: Difficulty::from_mean_points(initial_point_density(&tracklet.frames, &gt)),
        ious,
        shape_cd,
    })
}

/// Per-tracklet results of an in-memory benchmark run.
#[derive(Clone, Debug)]
pub struct BenchmarkRun {
    pub inputs: Vec<EvalInput>,
    pub results: Vec<TrackResult>,
    pub reports: Vec<EvalReport>,
}

/// Tracks and scores in-memory tracklets.
pub fn benchmark(tracklets: &[Tracklet], cfg: &RunConfig, workers: usize) -> Result<BenchmarkRun> {
    let scored: Vec<(EvalInput, TrackResult)> = pool(workers)?.install(|| {
        tracklets
            .par_iter()
            .map(|t| {
                let result = track(t, &cfg.tracker(), &cfg.solver(), &cfg.weights())?;
                let states = result.all_states(t.first_box.state);
                let input = score_tracklet(t, &states, Some(&result.shape), cfg.chamfer_voxel)?;
                Ok((input, result))
            })
            .collect::<Vec<Result<_>>>()
            .into_iter()
            .collect::<Result<Vec<_>>>()
    })?;
    let (inputs, results): (Vec<_>, Vec<_>) = scored.into_iter().unzip();
    let reports = split_reports(&inputs);
    Ok(BenchmarkRun {
        inputs,
        results,
        reports,
    })
}

/// Result directories under `root` keyed by their name.
fn result_dirs(root: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    Ok(entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(STATES).is_file())
        .filter_map(|p| Some((p.file_name()?.to_string_lossy().into_owned(), p)))
        .collect())
}

fn score_result_dir(gt_dir: &Path, result: &Path, voxel: f64) -> Result<EvalInput> {
    let tracklet = ArchiveReader::open(gt_dir)?.load()?;
    let rows = read_states(&result.join(STATES))?;
    let mut states = vec![tracklet.first_box.state];
    for (i, (frame, state)) in rows.iter().enumerate() {
        if *frame != i + 2 {
            return Err(Error::LengthMismatch(format!(
                "{}: row {} is frame {}, expected {}",
                result.join(STATES).display(),
                i + 1,
                frame,
                i + 2
            )));
        }
        states.push(*state);
    }
    let shape_path = result.join(SHAPE);
    let shape = if shape_path.is_file() {
        Some(read_points(&shape_path, Frame::FirstFrameAnchor)?)
    } else {
        None
    };
    score_tracklet(&tracklet, &states, shape.as_ref(), voxel)
}

/// Scores every result directory against the ground-truth archives. All
/// ground-truth ids must have results and vice versa.
pub fn cmd_eval(
    results: &Path,
    gt: &Path,
    cfg: &RunConfig,
    output: &Path,
    workers: usize,
) -> Result<Vec<EvalReport>> {
    let found = result_dirs(results)?;
    if found.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no tracking results under {}",
            results.display()
        )));
    }
    let mut archives = BTreeMap::new();
    for dir in list_archives(gt)? {
        let reader = ArchiveReader::open(&dir)?;
        archives.insert(reader.manifest.id.clone(), dir);
    }
    let gt_ids: BTreeSet<&String> = archives.keys().collect();
    let result_ids: BTreeSet<&String> = found.keys().collect();
    let mut missing: Vec<String> = gt_ids
        .difference(&result_ids)
        .map(|id| format!("{id} (no result)"))
        .collect();
    missing.extend(
        result_ids
            .difference(&gt_ids)
            .map(|id| format!("{id} (no ground truth)")),
    );
    if !missing.is_empty() {
        return Err(Error::MissingIds(missing.join(", ")));
    }

    let pairs: Vec<(&PathBuf, &PathBuf)> = archives.iter().map(|(id, g)| (g, &found[id])).collect();
    let inputs: Vec<EvalInput> = pool(workers)?.install(|| {
        pairs
            .par_iter()
            .map(|(g, r)| score_result_dir(g, r, cfg.chamfer_voxel))
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<Vec<_>>>()
    })?;
    let reports = split_reports(&inputs);
    create_dir(output)?;
    let txt = output.join("report.txt");
    fs::write(&txt, report_key_values(&reports)).map_err(|e| Error::io(&txt, e))?;
    write_json(&output.join("report.json"), &reports)?;
    Ok(reports)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.6}"))
}

/// `split.key = value` lines, one split after another.
pub fn report_key_values(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let s = &r.split;
        let _ = writeln!(out, "{s}.tracklets = {}", r.tracklets);
        let _ = writeln!(out, "{s}.acc = {:.6}", r.acc);
        let _ = writeln!(out, "{s}.rob = {:.6}", r.rob);
        let _ = writeln!(out, "{s}.shape_cd = {}", fmt_opt(r.shape_cd));
    }
    out
}

/// Columns per split: accuracy (higher is better), robustness (higher is
/// better) and shape distance (lower is better).
pub fn report_table(reports: &[EvalReport]) -> String {
    let mut head = format!("{:<8}", "");
    let mut sub = format!("{:<8}", "");
    let mut row = format!("{:<8}", "");
    for r in reports {
        let _ = write!(head, "| {:^26} ", format!("{} ({})", r.split, r.tracklets));
        let _ = write!(sub, "| {:>8} {:>8} {:>8} ", "Acc↑", "Rob↑", "Shape↓");
        let _ = write!(
            row,
            "| {:>8.4} {:>8.4} {:>8} ",
            r.acc,
            r.rob,
            r.shape_cd.map_or("-".into(), |c| format!("{c:.4}"))
        );
    }
    format!("{head}\n{sub}\n{row}\n")
}

/// Writes `spec.tracklets` archives under `output`.
pub fn cmd_synth(spec: &SuiteSpec, output: &Path, workers: usize) -> Result<Vec<PathBuf>> {
    spec.validate()?;
    create_dir(output)?;
    pool(workers)?.install(|| {
        (0..spec.tracklets)
            .into_par_iter()
            .map(|i| {
                let t = generate_suite_entry(spec, i)?;
                let dir = output.join(&t.id);
                write_archive(&dir, &t)?;
                Ok(dir)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    })
}

pub fn load_suite_spec(path: &Path) -> Result<SuiteSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
}

/// Motion records of a tracked result; the archive supplies the first-frame
/// state and, when annotated, the ground truth.
pub fn cmd_export_motion(
    archive: &Path,
    result: &Path,
    window: usize,
    output: &Path,
) -> Result<MotionExport> {
    let reader = ArchiveReader::open(archive)?;
    let rows = read_states(&result.join(STATES))?;
    let states: Vec<ObjectState> = std::iter::once(reader.manifest.first_box.state)
        .chain(rows.into_iter().map(|(_, s)| s))
        .collect();
    let gt = reader.manifest.gt_states.as_deref();
    if let Some(g) = gt {
        if g.len() != states.len() {
            return Err(Error::LengthMismatch(format!(
                "{} states in {} vs {} frames in {}",
                states.len() - 1,
                result.display(),
                g.len(),
                archive.display()
            )));
        }
    }
    let export = export_motion(&states, window, gt)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_json(output, &export)?;
    Ok(export)
}

/// Scan of a stored shape. Without `anchor` the shape is taken to be in
/// box-local coordinates; with it, the shape is anchored at that state.
pub fn cmd_simulate_scan(
    shape: &Path,
    anchor: Option<ObjectState>,
    pose: ObjectState,
    sensor: Point,
    resolution: f64,
    output: &Path,
) -> Result<PointCloud> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "angular resolution must be positive, got {resolution}"
        )));
    }
    let mut cloud = read_points(shape, Frame::World)?;
    if cloud.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: empty shape",
            shape.display()
        )));
    }
    if let Some(a) = anchor {
        cloud.points = cloud.iter().map(|p| to_local(&a, p)).collect();
    }
    let scan = simulate_scan(&cloud, &pose, &sensor, resolution);
    write_points(output, &scan)?;
    Ok(scan)
}
