//! Synthetic tracklets with exact ground truth, and a depth-buffer LiDAR scan
//! simulator.
//!
//! Vehicles are cuboid shells sampled on a jittered grid. A frame poses the
//! shell at its ground-truth state, keeps faces oriented towards the sensor,
//! optionally bins the survivors by (azimuth, elevation) keeping the nearest
//! point per bin, adds Gaussian noise and appends static ground and clutter.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::{from_local, in_box, Frame, Point, PointCloud, Tracklet};
use crate::error::{Error, Result};
use crate::state::{BoundingBox, BoxSize, ObjectState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Face {
    Front,
    Rear,
    Left,
    Right,
    Top,
}

impl Face {
    pub const ALL: [Face; 5] = [Face::Front, Face::Rear, Face::Left, Face::Right, Face::Top];

    /// Outward normal in the box-local frame.
    pub fn normal(&self) -> [f64; 3] {
        match self {
            Face::Front => [1.0, 0.0, 0.0],
            Face::Rear => [-1.0, 0.0, 0.0],
            Face::Left => [0.0, 1.0, 0.0],
            Face::Right => [0.0, -1.0, 0.0],
            Face::Top => [0.0, 0.0, 1.0],
        }
    }
}

/// A point of the template shell in box-local coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellPoint {
    pub local: Point,
    pub face: Face,
}

/// Open-bottom cuboid shell sampled on a jittered grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleTemplate {
    pub size: BoxSize,
    /// Surface samples per square meter.
    pub density: f64,
}

/// Cell lower edges and the common cell width over `[-extent/2, extent/2]`.
fn cells_1d(extent: f64, spacing: f64) -> (Vec<f64>, f64) {
    let n = (extent / spacing).round().max(1.0) as usize;
    let step = extent / n as f64;
    (
        (0..n).map(|i| -extent / 2.0 + i as f64 * step).collect(),
        step,
    )
}

/// Deterministic offset in [0.1, 0.9) of a cell, from a splitmix64 hash.
fn jitter(face: u64, i: usize, j: usize, axis: u64) -> f64 {
    let mut z = face
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((i as u64) << 32 ^ j as u64)
        .wrapping_add(axis.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    0.1 + 0.8 * (z >> 11) as f64 / (1u64 << 53) as f64
}

impl VehicleTemplate {
    pub fn new(size: BoxSize, density: f64) -> Result<Self> {
        if !(density.is_finite() && density > 0.0) {
            return Err(Error::InvalidInput(format!(
                "template density must be positive, got {density}"
            )));
        }
        Ok(Self { size, density })
    }

    /// One sample per grid cell on the four sides and the top, at a hashed
    /// position inside the cell. Jitter keeps a shell translated along a face
    /// from landing back on its own samples.
    pub fn shell(&self) -> Vec<ShellPoint> {
        let spacing = 1.0 / self.density.sqrt();
        let (l, w, h) = (self.size.length, self.size.width, self.size.height);
        let ((xs, dx), (ys, dy), (zs, dz)) = (
            cells_1d(l, spacing),
            cells_1d(w, spacing),
            cells_1d(h, spacing),
        );
        let mut out = Vec::new();
        let faces = [(Face::Front, l / 2.0), (Face::Rear, -l / 2.0)];
        for (f, (face, x)) in faces.into_iter().enumerate() {
            for (i, &y) in ys.iter().enumerate() {
                for (j, &z) in zs.iter().enumerate() {
                    let (u, v) = (jitter(f as u64, i, j, 0), jitter(f as u64, i, j, 1));
                    out.push(ShellPoint {
                        local: Point::new(x, y + u * dy, z + v * dz),
                        face,
                    });
                }
            }
        }
        let faces = [(Face::Left, w / 2.0), (Face::Right, -w / 2.0)];
        for (f, (face, y)) in faces.into_iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                for (j, &z) in zs.iter().enumerate() {
                    let (u, v) = (jitter(2 + f as u64, i, j, 0), jitter(2 + f as u64, i, j, 1));
                    out.push(ShellPoint {
                        local: Point::new(x + u * dx, y, z + v * dz),
                        face,
                    });
                }
            }
        }
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                let (u, v) = (jitter(4, i, j, 0), jitter(4, i, j, 1));
                out.push(ShellPoint {
                    local: Point::new(x + u * dx, y + v * dy, h / 2.0),
                    face: Face::Top,
                });
            }
        }
        out
    }

    /// Full shell posed at `state`.
    pub fn posed(&self, state: &ObjectState) -> PointCloud {
        PointCloud::world(
            self.shell()
                .iter()
                .map(|s| from_local(state, &s.local))
                .collect(),
        )
    }
}

/// Shell points on faces whose outward normal points towards the sensor,
/// posed at `state`.
pub fn visible_faces(
    shell: &[ShellPoint],
    state: &ObjectState,
    sensor: &Point,
) -> Vec<(Point, Face)> {
    let (s, c) = state.theta.sin_cos();
    shell
        .iter()
        .filter_map(|sp| {
            let n = sp.face.normal();
            let p = from_local(state, &sp.local);
            let v = sensor - p;
            let facing =
                (c * n[0] - s * n[1]) * v.x + (s * n[0] + c * n[1]) * v.y + n[2] * v.z > 0.0;
            facing.then_some((p, sp.face))
        })
        .collect()
}

fn bin_key(p: &Point, sensor: &Point, resolution: f64) -> ((i64, i64), f64) {
    let v = p - sensor;
    let horizontal = v.x.hypot(v.y);
    let az = v.y.atan2(v.x);
    let el = v.z.atan2(horizontal);
    (
        (
            (az / resolution).floor() as i64,
            (el / resolution).floor() as i64,
        ),
        v.norm(),
    )
}

/// Indices of the nearest point in every (azimuth, elevation) bin, ascending.
pub fn depth_buffer(points: &[Point], sensor: &Point, resolution: f64) -> Vec<usize> {
    let mut best: HashMap<(i64, i64), (f64, usize)> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        let (key, range) = bin_key(p, sensor, resolution);
        best.entry(key)
            .and_modify(|e| {
                if range < e.0 {
                    *e = (range, i);
                }
            })
            .or_insert((range, i));
    }
    let mut idx: Vec<usize> = best.values().map(|&(_, i)| i).collect();
    idx.sort_unstable();
    idx
}

/// Poses `shape` (box-local coordinates) at `pose` and keeps the nearest point
/// per angular bin as seen from `sensor`.
pub fn simulate_scan(
    shape: &PointCloud,
    pose: &ObjectState,
    sensor: &Point,
    resolution: f64,
) -> PointCloud {
    let posed: Vec<Point> = shape.iter().map(|p| from_local(pose, p)).collect();
    let keep = depth_buffer(&posed, sensor, resolution);
    PointCloud::world(keep.into_iter().map(|i| posed[i]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryKind {
    Static,
    ConstantVelocity,
    ConstantCurvature,
    /// Constant-curvature motion whose speed and curvature switch at
    /// `change_frame` (0-based).
    AbruptChange {
        change_frame: usize,
        speed_after: f64,
        curvature_after: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub initial: ObjectState,
    /// Meters per frame.
    pub speed: f64,
    /// 1/m, positive turns left.
    pub curvature: f64,
    /// Point noise standard deviation, meters.
    pub noise: f64,
    pub frames: usize,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.frames < 2 {
            return bad(format!(
                "trajectory needs at least 2 frames, got {}",
                self.frames
            ));
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return bad(format!("speed must be non-negative, got {}", self.speed));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be non-negative, got {}", self.noise));
        }
        if !self.initial.is_finite() || !self.curvature.is_finite() {
            return bad("non-finite trajectory parameter".into());
        }
        if let TrajectoryKind::AbruptChange {
            speed_after,
            curvature_after,
            ..
        } = self.kind
        {
            if !(speed_after >= 0.0 && speed_after.is_finite() && curvature_after.is_finite()) {
                return bad("invalid post-change motion".into());
            }
        }
        Ok(())
    }

    /// Ground-truth states, each in closed form from its segment start.
    pub fn states(&self) -> Vec<ObjectState> {
        let arc = |start: &ObjectState, speed: f64, curvature: f64, k: usize| -> ObjectState {
            let s = speed * k as f64;
            if curvature == 0.0 {
                let (sn, cs) = start.theta.sin_cos();
                return ObjectState::new(start.x + s * cs, start.y + s * sn, start.z, start.theta);
            }
            let r = 1.0 / curvature;
            let th = start.theta + s * curvature;
            let (s0, c0) = start.theta.sin_cos();
            let (s1, c1) = th.sin_cos();
            ObjectState::new(
                start.x + r * (s1 - s0),
                start.y - r * (c1 - c0),
                start.z,
                th,
            )
        };
        (0..self.frames)
            .map(|k| match self.kind {
                TrajectoryKind::Static => self.initial,
                TrajectoryKind::ConstantVelocity => arc(&self.initial, self.speed, 0.0, k),
                TrajectoryKind::ConstantCurvature => {
                    arc(&self.initial, self.speed, self.curvature, k)
                }
                TrajectoryKind::AbruptChange {
                    change_frame,
                    speed_after,
                    curvature_after,
                } => {
                    if k <= change_frame {
                        arc(&self.initial, self.speed, self.curvature, k)
                    } else {
                        let pivot = arc(&self.initial, self.speed, self.curvature, change_frame);
                        arc(&pivot, speed_after, curvature_after, k - change_frame)
                    }
                }
            })
            .collect()
    }
}

/// Static cuboid clutter (pole, parked car, wall).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clutter {
    pub center: [f64; 3],
    pub size: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

/// Ego sensor driving beside the target: a fixed lateral offset in the
/// target's frame and a longitudinal offset that changes at a constant rate,
/// so the view sweeps along the vehicle. The sensor height is absolute.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Escort {
    pub along: f64,
    pub lateral: f64,
    pub height: f64,
    /// Change of the longitudinal offset per frame, meters.
    pub along_rate: f64,
}

impl Escort {
    pub fn position(&self, target: &ObjectState, frame: usize) -> Point {
        let local = Point::new(
            self.along + self.along_rate * frame as f64,
            self.lateral,
            0.0,
        );
        let p = from_local(target, &local);
        Point::new(p.x, p.y, self.height)
    }
}

/// Scene and sensor settings shared by every frame of a tracklet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Sensor position at the first frame.
    pub sensor: [f64; 3],
    /// Sensor displacement per frame (ego motion), meters.
    pub sensor_velocity: [f64; 3],
    /// Overrides `sensor` and `sensor_velocity` with a sensor that follows
    /// the target.
    #[serde(default)]
    pub escort: Option<Escort>,
    /// Angular bin size for the depth buffer; `None` keeps every visible
    /// shell point.
    pub scan_resolution: Option<f64>,
    /// Random subsample of the object points to at most this many.
    pub max_object_points: Option<usize>,
    /// Range-dependent cap on the object points: `budget / range²` per
    /// frame, with the range measured from the sensor to the box center.
    pub point_budget: Option<f64>,
    /// Height of the ground plane, meters. `None` omits ground points.
    pub ground_z: Option<f64>,
    /// Ground lattice pitch and radius around the object, meters.
    pub ground_spacing: f64,
    pub ground_radius: f64,
    pub clutter: Vec<Clutter>,
    /// Clutter surface samples per square meter.
    pub clutter_density: f64,
    /// Spurious points per frame, as a fraction of the object points,
    /// scattered through a box 1.5× the object size.
    pub outlier_fraction: f64,
    /// Clearance between the shell and the labeled box on every side, so
    /// noisy surface points still fall inside the label.
    #[serde(default)]
    pub label_margin: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            sensor: [0.0, -15.0, 1.8],
            sensor_velocity: [0.0; 3],
            escort: None,
            scan_resolution: None,
            max_object_points: None,
            point_budget: None,
            ground_z: None,
            ground_spacing: 0.3,
            ground_radius: 7.0,
            clutter: Vec::new(),
            clutter_density: 100.0,
            outlier_fraction: 0.0,
            label_margin: 0.0,
        }
    }
}

fn round_f32(p: Point) -> Point {
    Point::new(p.x as f32 as f64, p.y as f32 as f64, p.z as f32 as f64)
}

fn clutter_points(c: &Clutter, density: f64, sensor: &Point) -> Vec<Point> {
    let template = VehicleTemplate {
        size: BoxSize {
            length: c.size[0],
            width: c.size[1],
            height: c.size[2],
        },
        density,
    };
    let state = ObjectState::new(c.center[0], c.center[1], c.center[2], c.yaw);
    visible_faces(&template.shell(), &state, sensor)
        .into_iter()
        .map(|(p, _)| p)
        .collect()
}

/// Generates a tracklet with ground-truth states and the noiseless full shell
/// (anchored at the first state) as the reference shape. Every coordinate is
/// representable as `f32`.
pub fn generate_tracklet(
    id: impl Into<String>,
    template: &VehicleTemplate,
    traj: &TrajectorySpec,
    scene: &SceneSpec,
    seed: u64,
) -> Result<Tracklet> {
    traj.validate()?;
    if let Some(res) = scene.scan_resolution {
        if !(res > 0.0 && res.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "scan resolution must be positive, got {res}"
            )));
        }
    }
    if !(scene.label_margin >= 0.0) {
        return Err(Error::InvalidInput(
            "label margin must be non-negative".into(),
        ));
    }
    if scene.ground_z.is_some() && !(scene.ground_spacing > 0.0) {
        return Err(Error::InvalidInput(
            "ground spacing must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, traj.noise).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let shell = template.shell();
    let states = traj.states();
    let m = 2.0 * scene.label_margin;
    let size = BoxSize::new(
        template.size.length + m,
        template.size.width + m,
        template.size.height + m,
    )?;

    let mut frames = Vec::with_capacity(states.len());
    for (k, state) in states.iter().enumerate() {
        let sensor = match &scene.escort {
            Some(e) => e.position(state, k),
            None => {
                let v = scene.sensor_velocity;
                let kf = k as f64;
                Point::new(
                    scene.sensor[0] + kf * v[0],
                    scene.sensor[1] + kf * v[1],
                    scene.sensor[2] + kf * v[2],
                )
            }
        };
        let visible: Vec<Point> = visible_faces(&shell, state, &sensor)
            .into_iter()
            .map(|(p, _)| p)
            .collect();
        let mut object: Vec<Point> = match scene.scan_resolution {
            Some(res) => depth_buffer(&visible, &sensor, res)
                .into_iter()
                .map(|i| visible[i])
                .collect(),
            None => visible,
        };
        let range = (sensor - Point::new(state.x, state.y, state.z)).norm();
        let cap = match (scene.max_object_points, scene.point_budget) {
            (Some(m), Some(b)) => Some(m.min((b / (range * range)) as usize)),
            (m, b) => m.or(b.map(|b| (b / (range * range)) as usize)),
        };
        let full = object.len();
        if let Some(max) = cap {
            if object.len() > max {
                let keep = rand::seq::index::sample(&mut rng, object.len(), max);
                let mut idx: Vec<usize> = keep.into_iter().collect();
                idx.sort_unstable();
                object = idx.into_iter().map(|i| object[i]).collect();
            }
        }
        let n_object = object.len();
        let mut points = object;

        if let Some(gz) = scene.ground_z {
            let sp = scene.ground_spacing;
            let r = scene.ground_radius;
            let (i0, i1) = (
                ((state.x - r) / sp).floor() as i64,
                ((state.x + r) / sp).ceil() as i64,
            );
            let (j0, j1) = (
                ((state.y - r) / sp).floor() as i64,
                ((state.y + r) / sp).ceil() as i64,
            );
            for i in i0..=i1 {
                for j in j0..=j1 {
                    let (x, y) = (i as f64 * sp, j as f64 * sp);
                    if (x - state.x).hypot(y - state.y) <= r {
                        let p = Point::new(x, y, gz);
                        // Ground under the vehicle is occluded.
                        if !in_box(state, &size, 1.0, &Point::new(x, y, state.z)) {
                            points.push(p);
                        }
                    }
                }
            }
        }
        // Clutter is thinned at the object's rate so both see the same sensor.
        let keep_rate = if full == 0 {
            1.0
        } else {
            n_object as f64 / full as f64
        };
        for c in &scene.clutter {
            if (c.center[0] - state.x).hypot(c.center[1] - state.y) <= 12.0 {
                for p in clutter_points(c, scene.clutter_density, &sensor) {
                    if keep_rate >= 1.0 || rng.random_bool(keep_rate) {
                        points.push(p);
                    }
                }
            }
        }

        if traj.noise > 0.0 {
            for p in points.iter_mut() {
                p.x += noise.sample(&mut rng);
                p.y += noise.sample(&mut rng);
                p.z += noise.sample(&mut rng);
            }
        }
        let n_outliers = (n_object as f64 * scene.outlier_fraction).round() as usize;
        for _ in 0..n_outliers {
            let local = Point::new(
                rng.random_range(-0.75..0.75) * size.length,
                rng.random_range(-0.75..0.75) * size.width,
                rng.random_range(-0.5..0.75) * size.height,
            );
            points.push(from_local(state, &local));
        }
        frames.push(PointCloud::world(
            points.into_iter().map(round_f32).collect(),
        ));
    }

    let first_state = states[0];
    let gt_shape = PointCloud::new(
        shell
            .iter()
            .map(|s| round_f32(from_local(&first_state, &s.local)))
            .collect(),
        Frame::FirstFrameAnchor,
    );
    let mut tracklet = Tracklet::new(id, frames, BoundingBox::new(first_state, size))?;
    tracklet.gt_states = Some(states);
    tracklet.gt_shape = Some(gt_shape);
    Ok(tracklet)
}

/// Parameters of a benchmark suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteSpec {
    pub tracklets: usize,
    pub seed: u64,
    pub min_frames: usize,
    pub max_frames: usize,
    pub noise: f64,
    /// Speed band of moving vehicles, m/frame.
    pub speed: [f64; 2],
    /// Sensor ranges are drawn log-uniformly from this band, meters.
    pub min_sensor_distance: f64,
    pub max_sensor_distance: f64,
    /// Object points per frame at 1 m; the count falls off as 1/range².
    pub point_budget: f64,
    pub template_density: f64,
    pub outlier_fraction: f64,
    /// Poles placed beside the path every this many meters; 0 disables.
    pub clutter_spacing: f64,
    /// Parked cars along the path of moving vehicles every this many meters,
    /// and one bumper-to-bumper neighbor of each static vehicle; 0 disables.
    pub parked_spacing: f64,
    /// Clearance between vehicle surfaces and their labeled boxes, meters.
    pub label_margin: f64,
    pub ground: bool,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            tracklets: 30,
            seed: 2021,
            min_frames: 100,
            max_frames: 200,
            noise: 0.02,
            speed: [0.2, 0.6],
            min_sensor_distance: 8.0,
            max_sensor_distance: 40.0,
            point_budget: 80_000.0,
            template_density: 400.0,
            outlier_fraction: 0.02,
            clutter_spacing: 12.0,
            parked_spacing: 15.0,
            label_margin: 0.05,
            ground: true,
        }
    }
}

/// Tracklet-admission rules of the benchmark: at least `min_frames` frames
/// and more than 20 in-box points in each of the first ten frames.
pub fn passes_suite_rules(t: &Tracklet, min_frames: usize) -> bool {
    if t.len() < min_frames {
        return false;
    }
    let boxes = t.gt_boxes().unwrap_or_else(|| vec![t.first_box]);
    (0..t.len().min(10)).all(|i| {
        let b = boxes.get(i).unwrap_or(&boxes[0]);
        t.frames[i]
            .iter()
            .filter(|p| in_box(&b.state, &b.size, 1.0, p))
            .count()
            > 20
    })
}

const SENSOR_HEIGHT: f64 = 2.0;
/// Closest lateral distance between the ego sensor and the target center.
const MIN_LANE_OFFSET: f64 = 3.5;
const VEHICLES: [[f64; 3]; 4] = [
    [4.5, 1.9, 1.6],
    [4.9, 2.0, 1.8],
    [5.6, 2.1, 2.2],
    [3.8, 1.7, 1.5],
];

/// Draws one tracklet's trajectory and scene for suite slot `index`.
fn draw_case(
    spec: &SuiteSpec,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(VehicleTemplate, TrajectorySpec, SceneSpec)> {
    let dims = VEHICLES[rng.random_range(0..VEHICLES.len())];
    let size = BoxSize::new(dims[0], dims[1], dims[2])?;
    let m = 2.0 * spec.label_margin;
    let template = VehicleTemplate::new(
        BoxSize::new(dims[0] - m, dims[1] - m, dims[2] - m)?,
        spec.template_density,
    )?;
    let frames = rng.random_range(spec.min_frames..=spec.max_frames.max(spec.min_frames));
    let heading = rng.random_range(-PI..PI);
    let initial = ObjectState::new(
        rng.random_range(-20.0..20.0),
        rng.random_range(-20.0..20.0),
        size.height / 2.0,
        heading,
    );
    let (kind, speed, curvature) = match index % 3 {
        0 => (TrajectoryKind::Static, 0.0, 0.0),
        1 => (
            TrajectoryKind::ConstantVelocity,
            rng.random_range(spec.speed[0]..=spec.speed[1]),
            0.0,
        ),
        _ => {
            let speed = rng.random_range(spec.speed[0]..=spec.speed[1]);
            // Heading sweeps between 90° and 180° over the tracklet.
            let sweep =
                rng.random_range(PI / 2.0..PI) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (
                TrajectoryKind::ConstantCurvature,
                speed,
                sweep / (speed * frames as f64),
            )
        }
    };
    let traj = TrajectorySpec {
        kind,
        initial,
        speed,
        curvature,
        noise: spec.noise,
        frames,
    };

    // Ego sensor in a neighboring lane, starting at a random bearing and a
    // log-uniform range. It escorts moving vehicles at a slightly different
    // speed and drives past static ones, so the view sweeps along the body.
    let log_range = rng.random_range(spec.min_sensor_distance.ln()..spec.max_sensor_distance.ln());
    let range = log_range.exp();
    let bearing = rng.random_range(-PI..PI);
    let (sb, cb) = bearing.sin_cos();
    let lateral = (range * sb).abs().max(MIN_LANE_OFFSET) * if sb < 0.0 { -1.0 } else { 1.0 };
    let along = range * cb;
    let along_rate = if speed == 0.0 {
        rng.random_range(-0.2..0.2)
    } else {
        rng.random_range(-0.1..0.1)
    };
    let escort = Escort {
        along,
        lateral,
        height: SENSOR_HEIGHT,
        along_rate,
    };
    let states = traj.states();
    let (s, c) = heading.sin_cos();

    let is_static = states.iter().all(|s| s.distance_xyz(&states[0]) < 1e-9);
    let mut clutter = Vec::new();
    let side = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    // Drops an object `off` meters to the side of the path every `spacing`
    // meters travelled.
    let mut along_path =
        |spacing: f64,
         rng: &mut ChaCha8Rng,
         make: &mut dyn FnMut(&ObjectState, &mut ChaCha8Rng) -> Clutter| {
            let mut travelled = 0.0;
            let mut next = rng.random_range(2.0..spacing.max(2.0 + 1e-9));
            for w in states.windows(2) {
                travelled += w[0].distance_xyz(&w[1]);
                if travelled >= next {
                    next += spacing;
                    clutter.push(make(&w[1], rng));
                }
            }
        };
    let lateral = |st: &ObjectState, off: f64, z: f64| {
        let (s, c) = st.theta.sin_cos();
        [st.x - off * s, st.y + off * c, z]
    };
    if spec.clutter_spacing > 0.0 {
        along_path(spec.clutter_spacing, rng, &mut |st, rng| {
            let off = side(rng) * (size.width / 2.0 + rng.random_range(0.25..0.6));
            Clutter {
                center: lateral(st, off, 1.25),
                size: [0.3, 0.3, 2.5],
                yaw: 0.0,
            }
        });
    }
    if spec.parked_spacing > 0.0 {
        along_path(spec.parked_spacing, rng, &mut |st, rng| {
            let d = VEHICLES[rng.random_range(0..VEHICLES.len())];
            let off = side(rng) * ((size.width + d[1]) / 2.0 + rng.random_range(0.3..1.0));
            Clutter {
                center: lateral(st, off, d[2] / 2.0),
                size: d,
                yaw: st.theta,
            }
        });
    }
    if is_static {
        if spec.clutter_spacing > 0.0 {
            let off = side(rng) * (size.width / 2.0 + 0.4);
            clutter.push(Clutter {
                center: lateral(&initial, off, 1.25),
                size: [0.3, 0.3, 2.5],
                yaw: 0.0,
            });
        }
        if spec.parked_spacing > 0.0 {
            let d = VEHICLES[rng.random_range(0..VEHICLES.len())];
            let gap = (size.length + d[0]) / 2.0 + rng.random_range(0.8..1.5);
            let ahead = side(rng) * gap;
            clutter.push(Clutter {
                center: [initial.x + ahead * c, initial.y + ahead * s, d[2] / 2.0],
                size: d,
                yaw: heading,
            });
        }
    }

    let scene = SceneSpec {
        escort: Some(escort),
        point_budget: Some(spec.point_budget),
        ground_z: if spec.ground { Some(0.0) } else { None },
        clutter,
        clutter_density: spec.template_density,
        outlier_fraction: spec.outlier_fraction,
        label_margin: spec.label_margin,
        ..SceneSpec::default()
    };
    Ok((template, traj, scene))
}

impl SuiteSpec {
    pub fn validate(&self) -> Result<()> {
        if self.min_frames < 2 || self.max_frames < self.min_frames {
            return Err(Error::InvalidInput(format!(
                "frame range [{}, {}] is invalid",
                self.min_frames, self.max_frames
            )));
        }
        if !(self.speed[0] > 0.0 && self.speed[1] >= self.speed[0]) {
            return Err(Error::InvalidInput("speed band is invalid".into()));
        }
        if !(self.min_sensor_distance > 0.0 && self.max_sensor_distance > self.min_sensor_distance)
        {
            return Err(Error::InvalidInput(
                "sensor distance range is invalid".into(),
            ));
        }
        if !(self.label_margin >= 0.0 && self.label_margin < 0.5) {
            return Err(Error::InvalidInput(
                "label margin must lie in [0, 0.5)".into(),
            ));
        }
        if !(self.noise >= 0.0 && self.point_budget > 0.0 && self.template_density > 0.0) {
            return Err(Error::InvalidInput(
                "noise must be non-negative and point budget and density positive".into(),
            ));
        }
        Ok(())
    }
}

/// Suite slot `index`; draws failing the admission rules are replaced by
/// fresh draws.
pub fn generate_suite_entry(spec: &SuiteSpec, index: usize) -> Result<Tracklet> {
    spec.validate()?;
    for attempt in 0..=100u64 {
        let case_seed = spec
            .seed
            .wrapping_mul(1_000_003)
            .wrapping_add(((index as u64) << 16) | attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
        let (template, traj, scene) = draw_case(spec, index, &mut rng)?;
        let t = generate_tracklet(
            format!("synth_{index:04}"),
            &template,
            &traj,
            &scene,
            rng.random(),
        )?;
        if passes_suite_rules(&t, spec.min_frames) {
            return Ok(t);
        }
    }
    Err(Error::InvalidInput(format!(
        "could not draw an admissible tracklet for slot {index}"
    )))
}

/// Generates `spec.tracklets` tracklets cycling static, straight and turning
/// motion.
pub fn generate_suite(spec: &SuiteSpec) -> Result<Vec<Tracklet>> {
    (0..spec.tracklets)
        .map(|i| generate_suite_entry(spec, i))
        .collect()
}
