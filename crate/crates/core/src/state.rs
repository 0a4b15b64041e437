//! 4-DOF object states, frame-to-frame motions and box parameterization.

use std::f64::consts::PI;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(theta: f64) -> f64 {
    if !theta.is_finite() {
        return theta;
    }
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Pose of an object center: position in meters, heading about +z in radians.
///
/// The heading is kept in `(-π, π]` by every constructor and arithmetic
/// operation.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
}

impl ObjectState {
    pub fn new(x: f64, y: f64, z: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            z,
            theta: normalize_angle(theta),
        }
    }

    /// Like [`ObjectState::new`] but rejects non-finite components.
    pub fn try_new(x: f64, y: f64, z: f64, theta: f64) -> Result<Self> {
        if [x, y, z, theta].iter().all(|v| v.is_finite()) {
            Ok(Self::new(x, y, z, theta))
        } else {
            Err(Error::InvalidInput(format!(
                "non-finite state [{x}, {y}, {z}, {theta}]"
            )))
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.theta]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// Componentwise `self + delta`, the initialization `S_{k-1} + ΔS` of a
    /// frame solve.
    pub fn compose(&self, delta: &MotionDelta) -> ObjectState {
        compose_state(self, delta)
    }

    /// The motion taking `earlier` to `self`.
    pub fn delta_from(&self, earlier: &ObjectState) -> MotionDelta {
        MotionDelta::new(
            self.x - earlier.x,
            self.y - earlier.y,
            self.z - earlier.z,
            self.theta - earlier.theta,
        )
    }

    pub fn distance_xyz(&self, other: &ObjectState) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}

/// Componentwise sum with the heading wrapped back into `(-π, π]`.
pub fn compose_state(prev: &ObjectState, delta: &MotionDelta) -> ObjectState {
    ObjectState::new(
        prev.x + delta.dx,
        prev.y + delta.dy,
        prev.z + delta.dz,
        prev.theta + delta.dtheta,
    )
}

/// Difference of two consecutive states, `ΔS_k = S_k − S_{k−1}`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionDelta {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dtheta: f64,
}

impl MotionDelta {
    pub const ZERO: MotionDelta = MotionDelta {
        dx: 0.0,
        dy: 0.0,
        dz: 0.0,
        dtheta: 0.0,
    };

    pub fn new(dx: f64, dy: f64, dz: f64, dtheta: f64) -> Self {
        Self {
            dx,
            dy,
            dz,
            dtheta: normalize_angle(dtheta),
        }
    }

    /// Builds a delta from an optimizer vector without wrapping the angle.
    ///
    /// The solver works in an unwrapped parameter space; wrapping happens
    /// once the delta is folded into a state.
    pub fn from_array_raw(v: [f64; 4]) -> Self {
        Self {
            dx: v[0],
            dy: v[1],
            dz: v[2],
            dtheta: v[3],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.dx, self.dy, self.dz, self.dtheta]
    }

    pub fn scale(&self, s: f64) -> MotionDelta {
        MotionDelta::new(self.dx * s, self.dy * s, self.dz * s, self.dtheta * s)
    }

    pub fn translation_norm(&self) -> f64 {
        (self.dx * self.dx + self.dy * self.dy + self.dz * self.dz).sqrt()
    }
}

impl Add for MotionDelta {
    type Output = MotionDelta;
    fn add(self, rhs: MotionDelta) -> MotionDelta {
        MotionDelta::new(
            self.dx + rhs.dx,
            self.dy + rhs.dy,
            self.dz + rhs.dz,
            self.dtheta + rhs.dtheta,
        )
    }
}

impl Sub for MotionDelta {
    type Output = MotionDelta;
    fn sub(self, rhs: MotionDelta) -> MotionDelta {
        MotionDelta::new(
            self.dx - rhs.dx,
            self.dy - rhs.dy,
            self.dz - rhs.dz,
            self.dtheta - rhs.dtheta,
        )
    }
}

impl Neg for MotionDelta {
    type Output = MotionDelta;
    fn neg(self) -> MotionDelta {
        MotionDelta::new(-self.dx, -self.dy, -self.dz, -self.dtheta)
    }
}

/// Cuboid dimensions in meters; fixed for the whole tracklet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSize {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl BoxSize {
    pub fn new(length: f64, width: f64, height: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(length) && ok(width) && ok(height) {
            Ok(Self {
                length,
                width,
                height,
            })
        } else {
            Err(Error::InvalidInput(format!(
                "box size must be strictly positive, got [{length}, {width}, {height}]"
            )))
        }
    }

    pub fn scaled(&self, gamma: f64) -> BoxSize {
        BoxSize {
            length: self.length * gamma,
            width: self.width * gamma,
            height: self.height * gamma,
        }
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }
}

/// A yaw-oriented cuboid. The length axis is aligned with the heading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub state: ObjectState,
    pub size: BoxSize,
}

impl BoundingBox {
    pub fn new(state: ObjectState, size: BoxSize) -> Self {
        Self { state, size }
    }

    /// Bird's-eye-view corners, counter-clockwise, starting at front-left.
    pub fn bev_corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.state.theta.sin_cos();
        let hl = self.size.length / 2.0;
        let hw = self.size.width / 2.0;
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        local.map(|[lx, ly]| {
            [
                self.state.x + c * lx - s * ly,
                self.state.y + s * lx + c * ly,
            ]
        })
    }

    pub fn z_range(&self) -> (f64, f64) {
        let hh = self.size.height / 2.0;
        (self.state.z - hh, self.state.z + hh)
    }

    /// All eight corners; bottom four first.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let bev = self.bev_corners();
        let (lo, hi) = self.z_range();
        let mut out = [[0.0; 3]; 8];
        for (i, [x, y]) in bev.iter().enumerate() {
            out[i] = [*x, *y, lo];
            out[i + 4] = [*x, *y, hi];
        }
        out
    }
}
