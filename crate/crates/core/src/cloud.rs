//! Point clouds, tracklets and the planar rigid motion that moves them.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{BoundingBox, BoxSize, MotionDelta, ObjectState};

pub type Point = Point3<f64>;

/// Coordinate frame a cloud is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Frame {
    /// Sensor/world coordinates of the frame it was captured in.
    #[default]
    World,
    /// World coordinates with the object posed at its first-frame state.
    /// Aggregated shapes live here.
    FirstFrameAnchor,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Point>, frame: Frame) -> Self {
        Self { points, frame }
    }

    pub fn world(points: Vec<Point>) -> Self {
        Self::new(points, Frame::World)
    }

    pub fn empty(frame: Frame) -> Self {
        Self::new(Vec::new(), frame)
    }

    /// Builds a world-frame cloud, rejecting NaN/Inf coordinates.
    pub fn try_from_points(points: Vec<Point>) -> Result<Self> {
        if let Some(i) = points
            .iter()
            .position(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate at point {i}"
            )));
        }
        Ok(Self::world(points))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }

    pub fn extend_from(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }
}

/// A 4-DOF rigid motion: rotation by `dtheta` about the vertical axis through
/// a pivot, followed by a translation. This is the `ΔS ⊗ P_S` operator with
/// trigonometry evaluated once.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarMotion {
    cos: f64,
    sin: f64,
    pivot_x: f64,
    pivot_y: f64,
    tx: f64,
    ty: f64,
    tz: f64,
}

impl PlanarMotion {
    pub fn new(delta: &MotionDelta, pivot: &ObjectState) -> Self {
        let (sin, cos) = delta.dtheta.sin_cos();
        Self {
            cos,
            sin,
            pivot_x: pivot.x,
            pivot_y: pivot.y,
            tx: delta.dx,
            ty: delta.dy,
            tz: delta.dz,
        }
    }

    /// The motion carrying an object posed at `from` to `to`, i.e.
    /// `(to − from) ⊗ P_from`.
    pub fn between(from: &ObjectState, to: &ObjectState) -> Self {
        Self::new(&to.delta_from(from), from)
    }

    #[inline]
    pub fn apply(&self, p: &Point) -> Point {
        let lx = p.x - self.pivot_x;
        let ly = p.y - self.pivot_y;
        // Written as an offset from `p` so the identity rotation is exact.
        Point::new(
            p.x + (self.cos - 1.0) * lx - self.sin * ly + self.tx,
            p.y + self.sin * lx + (self.cos - 1.0) * ly + self.ty,
            p.z + self.tz,
        )
    }

    pub fn inverse(&self) -> Self {
        Self {
            cos: self.cos,
            sin: -self.sin,
            pivot_x: self.pivot_x + self.tx,
            pivot_y: self.pivot_y + self.ty,
            tx: -self.tx,
            ty: -self.ty,
            tz: -self.tz,
        }
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud::new(
            cloud.points.iter().map(|p| self.apply(p)).collect(),
            cloud.frame,
        )
    }
}

/// Applies `delta` to every point, rotating about the vertical axis through
/// `pivot` and then translating. The input is left untouched.
pub fn apply_motion(delta: &MotionDelta, cloud: &PointCloud, pivot: &ObjectState) -> PointCloud {
    PlanarMotion::new(delta, pivot).apply_cloud(cloud)
}

/// Inverse of [`apply_motion`] with the same `delta` and `pivot`.
pub fn undo_motion(delta: &MotionDelta, cloud: &PointCloud, pivot: &ObjectState) -> PointCloud {
    PlanarMotion::new(delta, pivot).inverse().apply_cloud(cloud)
}

/// Expresses `p` in the box-local frame of an object at `state`.
#[inline]
pub fn to_local(state: &ObjectState, p: &Point) -> Point {
    let (s, c) = state.theta.sin_cos();
    let dx = p.x - state.x;
    let dy = p.y - state.y;
    Point::new(c * dx + s * dy, -s * dx + c * dy, p.z - state.z)
}

/// Inverse of [`to_local`].
#[inline]
pub fn from_local(state: &ObjectState, p: &Point) -> Point {
    let (s, c) = state.theta.sin_cos();
    Point::new(
        state.x + c * p.x - s * p.y,
        state.y + s * p.x + c * p.y,
        state.z + p.z,
    )
}

#[inline]
pub fn in_box(state: &ObjectState, size: &BoxSize, gamma: f64, p: &Point) -> bool {
    let l = to_local(state, p);
    l.x.abs() <= gamma * size.length / 2.0
        && l.y.abs() <= gamma * size.width / 2.0
        && l.z.abs() <= gamma * size.height / 2.0
}

/// Points inside the cuboid centered at `state` with dimensions `gamma·size`.
/// Faces are inclusive.
pub fn points_in_box(
    cloud: &PointCloud,
    state: &ObjectState,
    size: &BoxSize,
    gamma: f64,
) -> PointCloud {
    debug_assert!(gamma > 0.0);
    PointCloud::new(
        cloud
            .points
            .iter()
            .filter(|p| in_box(state, size, gamma, p))
            .copied()
            .collect(),
        cloud.frame,
    )
}

/// One object's frame sequence plus its annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct Tracklet {
    pub id: String,
    pub frames: Vec<PointCloud>,
    pub first_box: BoundingBox,
    pub gt_states: Option<Vec<ObjectState>>,
    /// Dense reference shape, anchored at the first-frame state.
    pub gt_shape: Option<PointCloud>,
}

impl Tracklet {
    pub fn new(
        id: impl Into<String>,
        frames: Vec<PointCloud>,
        first_box: BoundingBox,
    ) -> Result<Self> {
        let t = Self {
            id: id.into(),
            frames,
            first_box,
            gt_states: None,
            gt_shape: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "tracklet {} has {} frames, need at least 2",
                self.id,
                self.frames.len()
            )));
        }
        if let Some(gt) = &self.gt_states {
            if gt.len() != self.frames.len() {
                return Err(Error::LengthMismatch(format!(
                    "tracklet {}: {} ground-truth states for {} frames",
                    self.id,
                    gt.len(),
                    self.frames.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn size(&self) -> BoxSize {
        self.first_box.size
    }

    /// Ground-truth boxes per frame, when states are annotated.
    pub fn gt_boxes(&self) -> Option<Vec<BoundingBox>> {
        self.gt_states.as_ref().map(|s| {
            s.iter()
                .map(|st| BoundingBox::new(*st, self.first_box.size))
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::world(pts.iter().map(|p| Point::new(p[0], p[1], p[2])).collect())
    }

    #[test]
    fn identity_motion() {
        let c = cloud(&[[1.0, 2.0, 3.0], [-4.0, 0.5, 1.0]]);
        let out = apply_motion(
            &MotionDelta::ZERO,
            &c,
            &ObjectState::new(3.0, -1.0, 0.0, 0.7),
        );
        assert_eq!(out, c);
    }

    // Eq.-5-style 4x4 homogeneous matrix, written out independently.
    fn homogeneous(delta: &MotionDelta, pivot: &ObjectState) -> [[f64; 4]; 4] {
        let (s, c) = delta.dtheta.sin_cos();
        let (x, y) = (pivot.x, pivot.y);
        [
            [c, -s, 0.0, x + delta.dx - x * c + y * s],
            [s, c, 0.0, y + delta.dy - x * s - y * c],
            [0.0, 0.0, 1.0, delta.dz],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    #[test]
    fn quarter_turn_plus_shift() {
        let delta = MotionDelta::new(1.0, 0.0, 0.0, FRAC_PI_2);
        let out = apply_motion(&delta, &cloud(&[[1.0, 0.0, 0.0]]), &ObjectState::default());
        let p = out.points[0];
        assert!((p.x - 1.0).abs() < 1e-12 && (p.y - 1.0).abs() < 1e-12 && p.z.abs() < 1e-12);
    }

    #[test]
    fn matches_homogeneous_matrix() {
        let delta = MotionDelta::new(0.3, -1.2, 0.4, 0.9);
        let pivot = ObjectState::new(5.0, -2.0, 1.0, 1.3);
        let m = homogeneous(&delta, &pivot);
        let c = cloud(&[[1.0, 2.0, 3.0], [7.0, -3.0, 0.2]]);
        for (p, q) in c.iter().zip(apply_motion(&delta, &c, &pivot).iter()) {
            let h = [p.x, p.y, p.z, 1.0];
            for r in 0..3 {
                let v: f64 = (0..4).map(|j| m[r][j] * h[j]).sum();
                assert!((v - q[r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pure_z_translation() {
        let out = apply_motion(
            &MotionDelta::new(0.0, 0.0, 2.0, 0.0),
            &cloud(&[[0.3, -0.7, 1.1]]),
            &ObjectState::new(9.0, 9.0, 0.0, 0.0),
        );
        assert_eq!(out.points[0], Point::new(0.3, -0.7, 3.1));
    }

    #[test]
    fn undo_inverts() {
        let delta = MotionDelta::new(0.3, -1.2, 0.4, 2.9);
        let pivot = ObjectState::new(5.0, -2.0, 1.0, 1.3);
        let c = cloud(&[[1.0, 2.0, 3.0], [7.0, -3.0, 0.2]]);
        let back = undo_motion(&delta, &apply_motion(&delta, &c, &pivot), &pivot);
        for (a, b) in c.iter().zip(back.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn between_poses_object() {
        let from = ObjectState::new(1.0, 2.0, 0.5, 0.3);
        let to = ObjectState::new(-4.0, 7.0, 0.9, -2.5);
        let local = Point::new(1.2, -0.4, 0.3);
        let moved = PlanarMotion::between(&from, &to).apply(&from_local(&from, &local));
        assert!((moved - from_local(&to, &local)).norm() < 1e-12);
    }

    #[test]
    fn box_membership_examples() {
        let unit = BoxSize::new(1.0, 1.0, 1.0).unwrap();
        let origin = ObjectState::default();
        let c = cloud(&[[0.49, 0.0, 0.0], [0.51, 0.0, 0.0]]);
        let inside = points_in_box(&c, &origin, &unit, 1.0);
        assert_eq!(inside.points, vec![Point::new(0.49, 0.0, 0.0)]);

        let c = cloud(&[[0.6, 0.0, 0.0]]);
        assert_eq!(points_in_box(&c, &origin, &unit, 1.5).len(), 1);

        let rotated = ObjectState::new(0.0, 0.0, 0.0, FRAC_PI_2);
        let size = BoxSize::new(2.0, 1.0, 1.0).unwrap();
        let c = cloud(&[[0.4, 0.9, 0.0]]);
        assert_eq!(points_in_box(&c, &rotated, &size, 1.0).len(), 1);
        // Same point against the unrotated box lies outside the width.
        assert_eq!(points_in_box(&c, &origin, &size, 1.0).len(), 0);
    }

    #[test]
    fn boundary_is_closed() {
        let unit = BoxSize::new(1.0, 1.0, 1.0).unwrap();
        let c = cloud(&[[0.5, 0.5, 0.5], [-0.5, -0.5, -0.5]]);
        assert_eq!(
            points_in_box(&c, &ObjectState::default(), &unit, 1.0).len(),
            2
        );
    }

    #[test]
    fn empty_cloud_passthrough() {
        let e = PointCloud::empty(Frame::World);
        assert!(apply_motion(
            &MotionDelta::new(1.0, 1.0, 1.0, 1.0),
            &e,
            &ObjectState::default()
        )
        .is_empty());
        let unit = BoxSize::new(1.0, 1.0, 1.0).unwrap();
        assert!(points_in_box(&e, &ObjectState::default(), &unit, 1.0).is_empty());
    }

    #[test]
    fn tracklet_validation() {
        let b = BoundingBox::new(ObjectState::default(), BoxSize::new(1.0, 1.0, 1.0).unwrap());
        assert!(Tracklet::new("a", vec![PointCloud::default()], b).is_err());
        let mut t = Tracklet::new("a", vec![PointCloud::default(); 3], b).unwrap();
        t.gt_states = Some(vec![ObjectState::default(); 2]);
        assert!(t.validate().is_err());
    }

    #[test]
    fn rejects_nan_points() {
        assert!(PointCloud::try_from_points(vec![Point::new(0.0, f64::NAN, 0.0)]).is_err());
    }
}
