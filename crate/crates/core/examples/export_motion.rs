//! Tracks a constant-velocity vehicle and prints its motion export: per-frame
//! deltas, the 30-frame cumulative displacement and the displacement error
//! against ground truth as a function of the horizon.
//!
//! `cargo run --release --example export_motion -- [noise_m]`

use sotracker::motion::export_motion;
use sotracker::synth::{
    generate_tracklet, Escort, SceneSpec, TrajectoryKind, TrajectorySpec, VehicleTemplate,
};
use sotracker::{track, BoxSize, ObjectState, RunConfig};

fn main() -> sotracker::Result<()> {
    let noise: f64 = std::env::args()
        .nth(1)
        .map_or(0.0, |s| s.parse().expect("noise in meters"));
    let template = VehicleTemplate::new(BoxSize::new(4.4, 1.8, 1.5)?, 100.0)?;
    let traj = TrajectorySpec {
        kind: TrajectoryKind::ConstantVelocity,
        initial: ObjectState::new(3.0, -2.0, 0.8, -2.0),
        speed: 0.3,
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
    let tracklet = generate_tracklet("cv", &template, &traj, &scene, 70)?;
    let cfg = RunConfig::default();
    let result = track(&tracklet, &cfg.tracker(), &cfg.solver(), &cfg.weights())?;
    let states = result.all_states(tracklet.first_box.state);

    let export = export_motion(&states, 30, tracklet.gt_states.as_deref())?;
    for r in export.records.iter().step_by(20) {
        println!(
            "frame {:>3} delta=({:+.3}, {:+.3}, {:+.4}) over {:>2} frames=({:+.3}, {:+.3})",
            r.frame,
            r.delta.dx,
            r.delta.dy,
            r.delta.dtheta,
            r.horizon,
            r.cumulative.dx,
            r.cumulative.dy
        );
    }
    for (h, dev) in export
        .deviation
        .iter()
        .flatten()
        .filter(|(h, _)| [1, 5, 10, 20, 30].contains(h))
    {
        println!(
            "horizon {h:>2}: mean displacement error {:.2} cm",
            dev * 100.0
        );
    }
    Ok(())
}
