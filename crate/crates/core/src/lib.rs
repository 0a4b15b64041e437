//! Model-free single-object tracking of vehicles in LiDAR point-cloud
//! sequences.
//!
//! Given the first-frame box of a vehicle, the tracker estimates a 4-DOF state
//! `[x, y, z, θ]` per frame by minimizing a registration loss against the
//! previous object points and a shape aggregated on the fly, while enforcing
//! motion consistency and a smoothed motion prior. The crate also provides
//! the accuracy/robustness/shape metrics, a synthetic tracklet generator
//! with exact ground truth, and the on-disk formats used by `sotrack`.

pub mod association;
pub mod cloud;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod iou;
pub mod kdtree;
pub mod metrics;
pub mod motion;
pub mod objective;
pub mod optimizer;
pub mod preprocess;
pub mod state;
pub mod synth;
pub mod tracker;

pub use cloud::{apply_motion, points_in_box, Frame, PlanarMotion, Point, PointCloud, Tracklet};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use objective::LossWeights;
pub use optimizer::SolverConfig;
pub use state::{BoundingBox, BoxSize, MotionDelta, ObjectState};
pub use tracker::{track, ShapeMode, TrackResult, Tracker, TrackerConfig};
