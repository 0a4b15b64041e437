//! Registers one frame against the previous one: a visible vehicle surface is
//! moved by a known planar motion and the frame solver recovers it from a
//! zero prior with no motion prior term.
//!
//! `cargo run --release --example registration -- [dx] [dy] [dtheta]`

use sotracker::association::RansacParams;
use sotracker::optimizer::{frame_estimate, FrameInputs, FrameSettings};
use sotracker::synth::{visible_faces, VehicleTemplate};
use sotracker::{
    apply_motion, BoxSize, LossWeights, MotionDelta, ObjectState, Point, PointCloud, SolverConfig,
};

fn main() -> sotracker::Result<()> {
    let v: Vec<f64> = std::env::args()
        .skip(1)
        .map(|s| s.parse().expect("number"))
        .collect();
    let truth = MotionDelta::new(
        v.first().copied().unwrap_or(0.4),
        v.get(1).copied().unwrap_or(0.1),
        0.0,
        v.get(2).copied().unwrap_or(0.05),
    );

    let size = BoxSize::new(4.5, 1.8, 1.5)?;
    let template = VehicleTemplate::new(size, 100.0)?;
    let prev_state = ObjectState::new(10.0, 5.0, 0.75, 0.6);
    let sensor = Point::new(0.0, 0.0, 1.8);
    let prev = PointCloud::world(
        visible_faces(&template.shell(), &prev_state, &sensor)
            .into_iter()
            .map(|(p, _)| p)
            .collect(),
    );
    let frame = apply_motion(&truth, &prev, &prev_state);

    let inputs = FrameInputs {
        frame: &frame,
        prev_object: &prev,
        prior: MotionDelta::default(),
        prev_state,
        size,
        first_state: prev_state,
        shape: &prev,
        gamma_in: 1.5,
    };
    let settings = FrameSettings {
        // There is no motion history, so the zero prior carries no
        // information and would bias the estimate towards standing still.
        weights: LossWeights {
            motion_prior: 0.0,
            ..LossWeights::default()
        },
        // A cold start needs more rounds than tracking, where the prior is
        // already close: point pairs on faces parallel to the motion only
        // let the estimate slide a little per round.
        solver: SolverConfig {
            max_outer_iterations: 50,
            ..SolverConfig::default()
        },
        ransac: Some(RansacParams::default()),
        seed: 0,
    };
    let est = frame_estimate(&inputs, &settings);
    let got = est.state.delta_from(&prev_state);
    println!(
        "true      ({:+.4}, {:+.4}, {:+.4})",
        truth.dx, truth.dy, truth.dtheta
    );
    println!(
        "estimated ({:+.4}, {:+.4}, {:+.4})",
        got.dx, got.dy, got.dtheta
    );
    for (i, it) in est.diagnostics.iterations.iter().enumerate().step_by(5) {
        println!(
            "round {}: {} icp pairs, {} of {} shape pairs kept, loss {:.6} -> {:.6}",
            i + 1,
            it.icp_pairs,
            it.shape_pairs,
            it.shape_raw_pairs,
            it.loss_start,
            it.loss_end
        );
    }
    Ok(())
}
