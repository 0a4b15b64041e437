//! Fits and removes the ground plane from one synthetic frame containing a
//! vehicle, a pole and a wall, and reports what was kept.
//!
//! `cargo run --release --example ground_removal`

use sotracker::preprocess::{remove_ground, GroundParams};
use sotracker::synth::{
    generate_tracklet, Clutter, SceneSpec, TrajectoryKind, TrajectorySpec, VehicleTemplate,
};
use sotracker::{points_in_box, BoxSize, ObjectState};

fn main() -> sotracker::Result<()> {
    let template = VehicleTemplate::new(BoxSize::new(4.5, 1.8, 1.5)?, 100.0)?;
    let traj = TrajectorySpec {
        kind: TrajectoryKind::Static,
        initial: ObjectState::new(0.0, 0.0, 0.75, 0.3),
        speed: 0.0,
        curvature: 0.0,
        noise: 0.01,
        frames: 2,
    };
    let scene = SceneSpec {
        ground_z: Some(0.0),
        clutter: vec![
            Clutter {
                center: [4.0, -3.0, 1.5],
                size: [0.3, 0.3, 3.0],
                yaw: 0.0,
            },
            Clutter {
                center: [0.0, 5.0, 1.0],
                size: [10.0, 0.3, 2.0],
                yaw: 0.0,
            },
        ],
        ..SceneSpec::default()
    };
    let tracklet = generate_tracklet("ground", &template, &traj, &scene, 3)?;
    let frame = &tracklet.frames[0];
    let b = tracklet.first_box;

    let out = remove_ground(frame, &GroundParams::default());
    match &out.model {
        Some(m) => println!(
            "plane normal=({:.4}, {:.4}, {:.4}) offset={:.4}",
            m.normal.x, m.normal.y, m.normal.z, m.offset
        ),
        None => println!("no plane accepted; frame kept unchanged"),
    }
    let object = |c| points_in_box(c, &b.state, &b.size, 1.0).len();
    println!("points: {} -> {}", frame.len(), out.cloud.len());
    println!(
        "in the labeled box: {} -> {}",
        object(frame),
        object(&out.cloud)
    );
    Ok(())
}
