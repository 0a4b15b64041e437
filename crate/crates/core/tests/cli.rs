//! End-to-end checks of the `sotrack` binary on small archives.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sotracker::io::{
    frame_file_name, list_archives, read_archive, read_states, write_archive, write_states, STATES,
};
use sotracker::synth::{
    generate_tracklet, Escort, SceneSpec, TrajectoryKind, TrajectorySpec, VehicleTemplate,
};
use sotracker::{BoxSize, ObjectState};

fn sotrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sotrack"))
        .args(args)
        .output()
        .expect("run sotrack")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A short constant-velocity archive at `dir/<id>`.
fn write_short_archive(dir: &Path, id: &str, frames: usize) {
    let template = VehicleTemplate::new(BoxSize::new(4.4, 1.8, 1.5).unwrap(), 60.0).unwrap();
    let traj = TrajectorySpec {
        kind: TrajectoryKind::ConstantVelocity,
        initial: ObjectState::new(3.0, -2.0, 0.8, 0.3),
        speed: 0.3,
        curvature: 0.0,
        noise: 0.01,
        frames,
    };
    let scene = SceneSpec {
        escort: Some(Escort {
            along: -6.0,
            lateral: 4.0,
            height: 2.0,
            along_rate: 0.02,
        }),
        ground_z: Some(0.0),
        label_margin: 0.05,
        ..SceneSpec::default()
    };
    let t = generate_tracklet(id, &template, &traj, &scene, 5).unwrap();
    write_archive(&dir.join(id), &t).unwrap();
}

#[test]
fn track_writes_one_row_per_frame_after_the_first_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("suite");
    write_short_archive(&suite, "a", 6);
    let (out1, out2) = (tmp.path().join("r1"), tmp.path().join("r2"));
    for out in [&out1, &out2] {
        let o = sotrack(&["track", s(&suite), "--output", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let rows = read_states(&out1.join("a").join(STATES)).unwrap();
    assert_eq!(
        rows.iter().map(|r| r.0).collect::<Vec<_>>(),
        vec![2, 3, 4, 5, 6]
    );
    for name in [STATES, "shape.bin", "diagnostics.json"] {
        assert_eq!(
            fs::read(out1.join("a").join(name)).unwrap(),
            fs::read(out2.join("a").join(name)).unwrap(),
            "{name} differs between runs"
        );
    }
}

#[test]
fn corrupted_frame_exits_2_naming_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("suite");
    write_short_archive(&suite, "bad", 4);
    let frame = suite.join("bad").join("frames").join(frame_file_name(3));
    let mut bytes = fs::read(&frame).unwrap();
    bytes.truncate(bytes.len() - 5);
    fs::write(&frame, bytes).unwrap();

    let o = sotrack(&["track", s(&suite), "--output", s(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(&frame_file_name(3)), "{err}");
}

#[test]
fn eval_of_ground_truth_states_scores_one() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("suite");
    write_short_archive(&suite, "a", 5);
    write_short_archive(&suite, "b", 5);
    let results = tmp.path().join("results");
    for dir in list_archives(&suite).unwrap() {
        let t = read_archive(&dir).unwrap();
        let gt = t.gt_states.unwrap();
        let rows: Vec<(usize, ObjectState)> = gt
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, s)| (i + 1, *s))
            .collect();
        fs::create_dir_all(results.join(&t.id)).unwrap();
        write_states(&results.join(&t.id).join(STATES), &rows).unwrap();
    }
    let o = sotrack(&["eval", "--results", s(&results), "--gt", s(&suite)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(results.join("report.txt")).unwrap();
    assert!(report.contains("all.acc = 1.000000"), "{report}");
    assert!(report.contains("all.rob = 1.000000"), "{report}");
}

#[test]
fn eval_of_empty_results_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("suite");
    write_short_archive(&suite, "a", 3);
    let results = tmp.path().join("results");
    fs::create_dir_all(&results).unwrap();
    let o = sotrack(&["eval", "--results", s(&results), "--gt", s(&suite)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_writes_thirty_long_archives() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("suite");
    let o = sotrack(&["synth", "--output", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dirs = list_archives(&out).unwrap();
    assert_eq!(dirs.len(), 30);
    for d in dirs {
        let frames = fs::read_dir(d.join("frames")).unwrap().count();
        assert!(frames >= 100, "{}: {frames} frames", d.display());
    }
}
