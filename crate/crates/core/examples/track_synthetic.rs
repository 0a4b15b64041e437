//! Tracks one synthetic vehicle driving at constant velocity past an escorting
//! sensor and prints the per-frame IoU against ground truth with the
//! accuracy and robustness of the run.
//!
//! `cargo run --release --example track_synthetic -- [noise_m] [seed]`

use sotracker::metrics::{accuracy, frame_ious, robustness};
use sotracker::synth::{
    generate_tracklet, Escort, SceneSpec, TrajectoryKind, TrajectorySpec, VehicleTemplate,
};
use sotracker::{track, BoxSize, ObjectState, RunConfig};

fn main() -> sotracker::Result<()> {
    let mut args = std::env::args().skip(1);
    let noise: f64 = args
        .next()
        .map_or(0.02, |s| s.parse().expect("noise in meters"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));

    let template = VehicleTemplate::new(BoxSize::new(4.4, 1.8, 1.5)?, 100.0)?;
    let traj = TrajectorySpec {
        kind: TrajectoryKind::ConstantVelocity,
        initial: ObjectState::new(3.0, -2.0, 0.8, 0.4),
        speed: 0.5,
        curvature: 0.0,
        noise,
        frames: 100,
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
    let tracklet = generate_tracklet("cv", &template, &traj, &scene, seed)?;

    let cfg = RunConfig::default();
    let result = track(&tracklet, &cfg.tracker(), &cfg.solver(), &cfg.weights())?;
    let states = result.all_states(tracklet.first_box.state);
    let ious = frame_ious(
        &states,
        &tracklet
            .gt_boxes()
            .expect("generator attaches ground truth"),
    )?;

    for (k, (s, iou)) in states.iter().zip(&ious).enumerate().step_by(10) {
        println!(
            "frame {:>3}  x={:>8.3} y={:>8.3} theta={:>7.4}  iou={iou:.3}",
            k + 1,
            s.x,
            s.y,
            s.theta
        );
    }
    let (rob, _) = robustness(std::slice::from_ref(&ious));
    println!(
        "acc={:.3} rob={rob:.3} shape points={}",
        accuracy(&[ious]),
        result.shape.len()
    );
    Ok(())
}
