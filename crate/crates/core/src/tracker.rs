//! Online tracklet pipeline: sequential frame solves, keyframe shape
//! aggregation and a moving-average motion prior.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::association::RansacParams;
use crate::cloud::{points_in_box, Frame, PlanarMotion, PointCloud, Tracklet};
use crate::error::{Error, Result};
use crate::objective::LossWeights;
use crate::optimizer::{
    frame_estimate, FrameDiagnostics, FrameInputs, FrameSettings, SolverConfig,
};
use crate::preprocess::{remove_ground, GroundParams};
use crate::state::{BoundingBox, BoxSize, MotionDelta, ObjectState};

/// Which shape feeds the shape term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeMode {
    /// The shape aggregated at keyframes so far.
    All,
    /// Only the first-frame object points.
    First,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Motion prior update factor.
    pub alpha: f64,
    /// Search-box scale inside the frame solve.
    pub gamma_in: f64,
    /// Box scale for collecting object points after the solve.
    pub gamma_aft: f64,
    /// Search-box scale for frame 2, where no motion prior exists yet.
    pub gamma_first: f64,
    pub keyframe_interval: usize,
    /// Extra past frames overlaid onto the registration source; 0 disables
    /// the subshape.
    pub subshape_window: usize,
    pub shape_mode: ShapeMode,
    /// `None` skips ground removal.
    pub ground: Option<GroundParams>,
    /// `None` keeps raw nearest-neighbor shape pairs.
    pub ransac: Option<RansacParams>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            gamma_in: 1.5,
            gamma_aft: 1.1,
            gamma_first: 3.0,
            keyframe_interval: 5,
            subshape_window: 2,
            shape_mode: ShapeMode::All,
            ground: Some(GroundParams::default()),
            ransac: Some(RansacParams::default()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// 1-based frame number.
    pub frame: usize,
    pub object_points: usize,
    pub shape_points: usize,
    pub keyframe: bool,
    pub ground_model_missing: bool,
    pub solve: FrameDiagnostics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackResult {
    /// Estimated states for frames 2..=L.
    pub states: Vec<ObjectState>,
    /// Aggregated shape, anchored at the first-frame state.
    pub shape: PointCloud,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl TrackResult {
    /// States for every frame, the given first-frame state included.
    pub fn all_states(&self, first: ObjectState) -> Vec<ObjectState> {
        std::iter::once(first)
            .chain(self.states.iter().copied())
            .collect()
    }
}

/// Appends `object_points` (world frame, object at `state`) to the shape when
/// `frame_index` is a keyframe.
pub fn overlay_shape(
    object_points: &PointCloud,
    state: &ObjectState,
    shape: &PointCloud,
    frame_index: usize,
    first_state: &ObjectState,
    cfg: &TrackerConfig,
) -> PointCloud {
    let mut out = shape.clone();
    if cfg.keyframe_interval > 0 && frame_index % cfg.keyframe_interval == 0 {
        let back = PlanarMotion::between(first_state, state).inverse();
        out.points
            .extend(object_points.iter().map(|p| back.apply(p)));
    }
    out.frame = Frame::FirstFrameAnchor;
    out
}

/// Moves each historical object cloud from its own state to `target` and
/// concatenates them.
pub fn build_subshape(history: &[(PointCloud, ObjectState)], target: &ObjectState) -> PointCloud {
    let mut out = PointCloud::empty(Frame::World);
    for (cloud, state) in history {
        let m = PlanarMotion::between(state, target);
        out.points.extend(cloud.iter().map(|p| m.apply(p)));
    }
    out
}

fn frame_seed(base: u64, frame: usize) -> u64 {
    base ^ (frame as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Online tracker: feed frames in order with [`Tracker::step`]; each state is
/// final once returned.
#[derive(Clone, Debug)]
pub struct Tracker {
    cfg: TrackerConfig,
    solver: SolverConfig,
    weights: LossWeights,
    size: BoxSize,
    first_state: ObjectState,
    prev_state: ObjectState,
    prior: MotionDelta,
    first_shape: PointCloud,
    shape: PointCloud,
    /// Most recent object clouds with their states, newest last.
    history: VecDeque<(PointCloud, ObjectState)>,
    frame_index: usize,
    seed: u64,
    states: Vec<ObjectState>,
    diagnostics: Vec<StepDiagnostics>,
}

impl Tracker {
    pub fn new(
        first_frame: &PointCloud,
        first_box: &BoundingBox,
        cfg: TrackerConfig,
        solver: SolverConfig,
        weights: LossWeights,
    ) -> Result<Self> {
        let (frame, ground_missing) = preprocess(first_frame, &cfg);
        let first_state = first_box.state;
        let object = points_in_box(&frame, &first_state, &first_box.size, 1.0);
        if object.is_empty() {
            return Err(Error::UntrackableInitialization);
        }
        let shape = object.clone().with_frame(Frame::FirstFrameAnchor);
        let mut history = VecDeque::new();
        history.push_back((object.clone(), first_state));
        let seed = cfg.ransac.map_or(0, |r| r.seed);
        Ok(Self {
            cfg,
            solver,
            weights,
            size: first_box.size,
            first_state,
            prev_state: first_state,
            prior: MotionDelta::ZERO,
            first_shape: shape.clone(),
            shape,
            history,
            frame_index: 1,
            seed,
            states: Vec::new(),
            diagnostics: vec![StepDiagnostics {
                frame: 1,
                object_points: object.len(),
                shape_points: object.len(),
                keyframe: false,
                ground_model_missing: ground_missing,
                solve: FrameDiagnostics::default(),
            }],
        })
    }

    /// Estimates the state for the next frame.
    pub fn step(&mut self, raw_frame: &PointCloud) -> ObjectState {
        self.frame_index += 1;
        let k = self.frame_index;
        let (frame, ground_missing) = preprocess(raw_frame, &self.cfg);

        let (prior, gamma) = if k == 2 {
            (MotionDelta::ZERO, self.cfg.gamma_first)
        } else {
            (self.prior, self.cfg.gamma_in)
        };
        let source = build_subshape(self.history.make_contiguous(), &self.prev_state);
        let shape = match self.cfg.shape_mode {
            ShapeMode::All => &self.shape,
            ShapeMode::First => &self.first_shape,
        };
        let estimate = frame_estimate(
            &FrameInputs {
                frame: &frame,
                prev_object: &source,
                prior,
                prev_state: self.prev_state,
                size: self.size,
                first_state: self.first_state,
                shape,
                gamma_in: gamma,
            },
            &FrameSettings {
                weights: self.weights,
                solver: self.solver,
                ransac: self.cfg.ransac,
                seed: frame_seed(self.seed, k),
            },
        );
        let state = estimate.state;

        let object = points_in_box(&frame, &state, &self.size, self.cfg.gamma_aft);
        let keyframe = self.cfg.keyframe_interval > 0 && k % self.cfg.keyframe_interval == 0;
        self.shape = overlay_shape(
            &object,
            &state,
            &self.shape,
            k,
            &self.first_state,
            &self.cfg,
        );

        let motion = state.delta_from(&self.prev_state);
        self.prior = if k == 2 {
            motion
        } else {
            self.prior.scale(self.cfg.alpha) + motion.scale(1.0 - self.cfg.alpha)
        };

        self.diagnostics.push(StepDiagnostics {
            frame: k,
            object_points: object.len(),
            shape_points: self.shape.len(),
            keyframe,
            ground_model_missing: ground_missing,
            solve: estimate.diagnostics,
        });
        self.history.push_back((object, state));
        while self.history.len() > self.cfg.subshape_window + 1 {
            self.history.pop_front();
        }
        self.prev_state = state;
        self.states.push(state);
        state
    }

    pub fn motion_prior(&self) -> MotionDelta {
        self.prior
    }

    pub fn shape(&self) -> &PointCloud {
        &self.shape
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn finish(self) -> TrackResult {
        TrackResult {
            states: self.states,
            shape: self.shape,
            diagnostics: self.diagnostics,
        }
    }
}

fn preprocess(frame: &PointCloud, cfg: &TrackerConfig) -> (PointCloud, bool) {
    match &cfg.ground {
        Some(params) => {
            let out = remove_ground(frame, params);
            let missing = out.model.is_none();
            (out.cloud, missing)
        }
        None => (frame.clone(), false),
    }
}

/// Tracks a whole tracklet.
pub fn track(
    tracklet: &Tracklet,
    cfg: &TrackerConfig,
    solver: &SolverConfig,
    weights: &LossWeights,
) -> Result<TrackResult> {
    tracklet.validate()?;
    let mut tracker = Tracker::new(
        &tracklet.frames[0],
        &tracklet.first_box,
        *cfg,
        *solver,
        *weights,
    )?;
    for frame in &tracklet.frames[1..] {
        tracker.step(frame);
    }
    Ok(tracker.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{from_local, Point};

    fn cube_points(state: &ObjectState) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..5 {
                let local = Point::new(-2.0 + 0.4 * i as f64, -0.8 + 0.4 * j as f64, 0.7);
                pts.push(from_local(state, &local));
                let side = Point::new(-2.0 + 0.4 * i as f64, 0.9, -0.6 + 0.3 * j as f64);
                pts.push(from_local(state, &side));
            }
        }
        PointCloud::world(pts)
    }

    #[test]
    fn prior_update_arithmetic() {
        let alpha = TrackerConfig::default().alpha;
        let prior = MotionDelta::new(1.0, 0.0, 0.0, 0.0);
        let next = prior.scale(alpha) + MotionDelta::new(2.0, 0.0, 0.0, 0.0).scale(1.0 - alpha);
        assert_eq!(next, MotionDelta::new(1.5, 0.0, 0.0, 0.0));
    }

    #[test]
    fn overlay_only_on_keyframes() {
        let cfg = TrackerConfig::default();
        let first = ObjectState::new(0.0, 0.0, 0.75, 0.0);
        let shape = cube_points(&first).with_frame(Frame::FirstFrameAnchor);
        let state = ObjectState::new(3.0, 1.0, 0.75, 0.4);
        let obs = cube_points(&state);
        assert_eq!(overlay_shape(&obs, &state, &shape, 4, &first, &cfg), shape);

        let grown = overlay_shape(&obs, &state, &shape, 5, &first, &cfg);
        assert_eq!(grown.len(), 2 * shape.len());
        for (a, b) in shape.iter().zip(&grown.points[shape.len()..]) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn subshape_single_and_static() {
        let s = ObjectState::new(1.0, 2.0, 0.75, 0.3);
        let c = cube_points(&s);
        assert_eq!(build_subshape(&[(c.clone(), s)], &s), c);

        let tripled = build_subshape(&[(c.clone(), s), (c.clone(), s), (c.clone(), s)], &s);
        assert_eq!(tripled.len(), 3 * c.len());
        for (i, p) in tripled.iter().enumerate() {
            assert!((p - c.points[i % c.len()]).norm() < 1e-9);
        }
    }

    #[test]
    fn subshape_registers_moving_object() {
        let states = [
            ObjectState::new(0.0, 0.0, 0.75, 0.0),
            ObjectState::new(1.0, 0.1, 0.75, 0.05),
            ObjectState::new(2.0, 0.3, 0.75, 0.1),
        ];
        let history: Vec<_> = states.iter().map(|s| (cube_points(s), *s)).collect();
        let target = states[2];
        let sub = build_subshape(&history, &target);
        assert_eq!(sub.len(), 3 * history[0].0.len());
        let size = BoxSize::new(4.5, 1.8, 1.5).unwrap();
        assert_eq!(points_in_box(&sub, &target, &size, 1.1).len(), sub.len());
    }

    #[test]
    fn empty_first_box_is_untrackable() {
        let b = BoundingBox::new(
            ObjectState::new(50.0, 0.0, 0.0, 0.0),
            BoxSize::new(1.0, 1.0, 1.0).unwrap(),
        );
        let frame = cube_points(&ObjectState::default());
        let cfg = TrackerConfig {
            ground: None,
            ..Default::default()
        };
        let err = Tracker::new(
            &frame,
            &b,
            cfg,
            SolverConfig::default(),
            LossWeights::default(),
        );
        assert!(matches!(err, Err(Error::UntrackableInitialization)));
    }

    #[test]
    fn frame_two_sets_prior_to_its_motion() {
        let size = BoxSize::new(4.5, 1.8, 1.5).unwrap();
        let s1 = ObjectState::new(0.0, 0.0, 0.75, 0.0);
        let s2 = ObjectState::new(0.5, 0.0, 0.75, 0.0);
        let cfg = TrackerConfig {
            ground: None,
            ..Default::default()
        };
        let mut t = Tracker::new(
            &cube_points(&s1),
            &BoundingBox::new(s1, size),
            cfg,
            SolverConfig::default(),
            LossWeights::default(),
        )
        .unwrap();
        let est = t.step(&cube_points(&s2));
        assert_eq!(t.motion_prior(), est.delta_from(&s1));
    }
}
