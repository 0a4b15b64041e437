//! Ground removal by iterative plane fitting.
//!
//! Seeds are the lowest fraction of points by height. Each iteration fits a
//! least-squares plane to the current inliers and re-selects every point
//! within the distance threshold. Points farther than the threshold above the
//! final plane are kept.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::{Point, PointCloud};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundParams {
    /// Inlier distance to the plane, meters.
    pub threshold: f64,
    pub iterations: usize,
    /// Fraction of lowest points used as the initial seed set.
    pub seed_fraction: f64,
    /// A fitted plane whose inliers cover less than this share of the cloud
    /// is not accepted as ground.
    pub min_inlier_fraction: f64,
    /// Steepest accepted ground slope, degrees.
    pub max_slope_deg: f64,
    /// Largest RMS distance of the inliers to an accepted plane, as a
    /// fraction of `threshold`. Points spread uniformly through the inlier
    /// slab (a band cut from vertical faces) sit near 0.58.
    pub max_rms_ratio: f64,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self {
            threshold: 0.2,
            iterations: 3,
            seed_fraction: 0.1,
            min_inlier_fraction: 0.1,
            max_slope_deg: 20.0,
            max_rms_ratio: 0.4,
        }
    }
}

/// Plane `normal·p + offset = 0` with an upward unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundModel {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl GroundModel {
    pub fn signed_distance(&self, p: &Point) -> f64 {
        self.normal.dot(&p.coords) + self.offset
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundRemoval {
    pub cloud: PointCloud,
    /// `None` when no plane could be fitted or it was rejected; the input is
    /// then returned unchanged.
    pub model: Option<GroundModel>,
}

fn fit_plane<'a>(points: impl Iterator<Item = &'a Point>) -> Option<GroundModel> {
    let pts: Vec<&Point> = points.collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let centroid = pts.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in &pts {
        let d = p.coords - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / n);
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let mut normal: Vector3<f64> = eig.eigenvectors.column(imin).into_owned();
    if normal.norm() == 0.0 || !normal.iter().all(|v| v.is_finite()) {
        return None;
    }
    normal.normalize_mut();
    if normal.z < 0.0 {
        normal = -normal;
    }
    if normal.z <= 0.0 {
        return None;
    }
    Some(GroundModel {
        normal,
        offset: -normal.dot(&centroid),
    })
}

/// Fits the ground plane. Returns `None` with fewer than three seeds, on a
/// degenerate fit, when the plane does not dominate the cloud, or when it is
/// steeper than `max_slope_deg`, or when its inliers do not form a thin layer.
pub fn fit_ground(cloud: &PointCloud, params: &GroundParams) -> Option<GroundModel> {
    let n_seeds = (cloud.len() as f64 * params.seed_fraction).floor() as usize;
    if n_seeds < 3 {
        return None;
    }
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.sort_by(|&a, &b| {
        cloud.points[a]
            .z
            .total_cmp(&cloud.points[b].z)
            .then(a.cmp(&b))
    });
    let mut model = fit_plane(order[..n_seeds].iter().map(|&i| &cloud.points[i]))?;
    for _ in 0..params.iterations {
        let inliers = cloud
            .iter()
            .filter(|p| model.signed_distance(p).abs() < params.threshold);
        model = fit_plane(inliers)?;
    }
    let (support, sq) = cloud
        .iter()
        .map(|p| model.signed_distance(p))
        .filter(|d| d.abs() < params.threshold)
        .fold((0usize, 0.0), |(n, sq), d| (n + 1, sq + d * d));
    if (support as f64) < params.min_inlier_fraction * cloud.len() as f64 {
        return None;
    }
    if (sq / support as f64).sqrt() > params.max_rms_ratio * params.threshold {
        return None;
    }
    // A steep "plane" is a wall or a vehicle side, not the road.
    if model.normal.z < params.max_slope_deg.to_radians().cos() {
        return None;
    }
    Some(model)
}

/// Drops ground points; see the module docs for the procedure.
pub fn remove_ground(cloud: &PointCloud, params: &GroundParams) -> GroundRemoval {
    match fit_ground(cloud, params) {
        Some(model) => GroundRemoval {
            cloud: PointCloud::new(
                cloud
                    .iter()
                    .filter(|p| model.signed_distance(p) > params.threshold)
                    .copied()
                    .collect(),
                cloud.frame,
            ),
            model: Some(model),
        },
        None => GroundRemoval {
            cloud: cloud.clone(),
            model: None,
        },
    }
}
