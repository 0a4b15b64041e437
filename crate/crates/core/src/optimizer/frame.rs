use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bfgs::{minimize, SolverConfig};
use crate::association::{associate_icp_with, associate_shape_with, RansacParams};
use crate::cloud::{points_in_box, PointCloud};
use crate::kdtree::NnIndex;
use crate::objective::{
    breakdown, loss_value_and_gradient, LossBreakdown, LossContext, LossWeights,
};
use crate::state::{compose_state, BoxSize, MotionDelta, ObjectState};

/// Inputs of one frame solve. Clouds are in world coordinates except `shape`,
/// which is anchored at `first_state`.
#[derive(Clone, Copy, Debug)]
pub struct FrameInputs<'a> {
    /// Current frame, ground already removed.
    pub frame: &'a PointCloud,
    /// Registration source, posed at `prev_state` (the previous object cloud
    /// or its subshape).
    pub prev_object: &'a PointCloud,
    pub prior: MotionDelta,
    pub prev_state: ObjectState,
    pub size: BoxSize,
    pub first_state: ObjectState,
    pub shape: &'a PointCloud,
    pub gamma_in: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterIteration {
    pub observed_points: usize,
    pub icp_pairs: usize,
    pub shape_pairs: usize,
    pub shape_raw_pairs: usize,
    pub ransac_degenerate: bool,
    /// Loss at the start of the inner solve (fresh correspondences).
    pub loss_start: f64,
    pub loss_end: f64,
    pub bfgs_iterations: usize,
    pub non_finite: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub iterations: Vec<OuterIteration>,
    /// No points inside the search box in any round; the state was
    /// propagated with the motion prior.
    pub no_observation: bool,
    /// Term values at the returned state under the last correspondences.
    pub terms: LossBreakdown,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameEstimate {
    pub state: ObjectState,
    pub diagnostics: FrameDiagnostics,
}

/// Association and solver settings beyond the loss weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameSettings {
    pub weights: LossWeights,
    pub solver: SolverConfig,
    /// `None` keeps every nearest-neighbor shape pair.
    pub ransac: Option<RansacParams>,
    /// Seed for this frame's RANSAC draws.
    pub seed: u64,
}

/// Alternates point selection, association and a BFGS solve of the frame
/// motion, starting from `prev_state + prior`.
pub fn frame_estimate(inputs: &FrameInputs<'_>, settings: &FrameSettings) -> FrameEstimate {
    let mut estimate = compose_state(&inputs.prev_state, &inputs.prior);
    let mut diagnostics = FrameDiagnostics::default();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let use_shape = settings.weights.shape != 0.0 && !inputs.shape.is_empty();
    let mut observed_any = false;

    for _ in 0..settings.solver.max_outer_iterations.max(1) {
        let observed = points_in_box(inputs.frame, &estimate, &inputs.size, inputs.gamma_in);
        let Ok(index) = NnIndex::build(&observed) else {
            continue;
        };
        observed_any = true;

        let guess = estimate.delta_from(&inputs.prev_state);
        let icp_pairs = associate_icp_with(inputs.prev_object, &index, &guess, &inputs.prev_state);
        let shape = if use_shape {
            associate_shape_with(
                inputs.shape,
                &index,
                &estimate,
                &inputs.first_state,
                settings.ransac.as_ref(),
                &mut rng,
            )
        } else {
            Default::default()
        };
        let ctx = LossContext::new(
            &icp_pairs,
            &shape.pairs,
            inputs.prev_state,
            inputs.first_state,
            inputs.prior,
        );
        let min = minimize(
            |d| loss_value_and_gradient(d, &ctx, &settings.weights),
            guess.as_array(),
            settings.solver.max_inner_iterations,
        );
        let solved = MotionDelta::from_array_raw(min.x);
        estimate = compose_state(&inputs.prev_state, &solved);
        diagnostics.terms = breakdown(&solved, &ctx, &settings.weights);
        diagnostics.iterations.push(OuterIteration {
            observed_points: observed.len(),
            icp_pairs: icp_pairs.len(),
            shape_pairs: shape.pairs.len(),
            shape_raw_pairs: shape.raw_count,
            ransac_degenerate: shape.degenerate,
            loss_start: min.initial_value,
            loss_end: min.value,
            bfgs_iterations: min.iterations,
            non_finite: min.non_finite,
        });
        if min.initial_value - min.value < settings.solver.outer_tolerance {
            break;
        }
    }

    if !observed_any {
        diagnostics.no_observation = true;
        estimate = compose_state(&inputs.prev_state, &inputs.prior);
    }
    FrameEstimate {
        state: estimate,
        diagnostics,
    }
}
