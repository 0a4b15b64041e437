//! Nearest-neighbor point pairing for the registration and shape terms.
//!
//! Registration pairs every previous-frame object point (moved by the current
//! motion guess) with its nearest observed point. Shape pairs do the same for
//! the aggregated shape and then drop outliers with a 4-DOF RANSAC fit.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{PlanarMotion, Point, PointCloud};
use crate::error::Result;
use crate::kdtree::NnIndex;
use crate::state::{MotionDelta, ObjectState};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointPair {
    /// Point before the motion is applied.
    pub source: Point,
    pub target: Point,
    pub inlier: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointPairSet {
    pub pairs: Vec<PointPair>,
}

impl PointPairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn inliers(&self) -> impl Iterator<Item = &PointPair> {
        self.pairs.iter().filter(|p| p.inlier)
    }

    pub fn inlier_count(&self) -> usize {
        self.inliers().count()
    }
}

/// Builds the exact nearest-neighbor index used by both associations.
pub fn build_nn_index(cloud: &PointCloud) -> Result<NnIndex> {
    NnIndex::build(cloud)
}

/// Pairs each `source` point, moved by `delta` about `pivot`, with its nearest
/// neighbor in the indexed target.
pub fn associate_icp_with(
    source: &PointCloud,
    target: &NnIndex,
    delta: &MotionDelta,
    pivot: &ObjectState,
) -> PointPairSet {
    let motion = PlanarMotion::new(delta, pivot);
    PointPairSet {
        pairs: source
            .iter()
            .map(|x| PointPair {
                source: *x,
                target: target.nearest(&motion.apply(x)).point,
                inlier: true,
            })
            .collect(),
    }
}

pub fn associate_icp(
    source: &PointCloud,
    target: &PointCloud,
    delta: &MotionDelta,
    pivot: &ObjectState,
) -> Result<PointPairSet> {
    let index = build_nn_index(target)?;
    Ok(associate_icp_with(source, &index, delta, pivot))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    pub sample_size: usize,
    pub iterations: usize,
    /// Residual (meters) under which a pair counts as an inlier.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            sample_size: 3,
            iterations: 100,
            threshold: 0.3,
            seed: 0,
        }
    }
}

/// 4-DOF rigid map `p ↦ R(yaw)·p + t` fitted between paired points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YawRigid {
    pub yaw: f64,
    pub translation: [f64; 3],
}

impl YawRigid {
    pub fn apply(&self, p: &Point) -> Point {
        let (s, c) = self.yaw.sin_cos();
        Point::new(
            c * p.x - s * p.y + self.translation[0],
            s * p.x + c * p.y + self.translation[1],
            p.z + self.translation[2],
        )
    }

    /// Least-squares fit over `(from, to)` pairs.
    pub fn fit<'a>(pairs: impl Iterator<Item = (&'a Point, &'a Point)> + Clone) -> Option<Self> {
        let n = pairs.clone().count();
        if n == 0 {
            return None;
        }
        let nf = n as f64;
        let (mut ca, mut cb) = ([0.0; 3], [0.0; 3]);
        for (a, b) in pairs.clone() {
            for i in 0..3 {
                ca[i] += a[i] / nf;
                cb[i] += b[i] / nf;
            }
        }
        let (mut sdot, mut scross) = (0.0, 0.0);
        for (a, b) in pairs {
            let (ax, ay) = (a.x - ca[0], a.y - ca[1]);
            let (bx, by) = (b.x - cb[0], b.y - cb[1]);
            sdot += ax * bx + ay * by;
            scross += ax * by - ay * bx;
        }
        let yaw = scross.atan2(sdot);
        let (s, c) = yaw.sin_cos();
        Some(Self {
            yaw,
            translation: [
                cb[0] - (c * ca[0] - s * ca[1]),
                cb[1] - (s * ca[0] + c * ca[1]),
                cb[2] - ca[2],
            ],
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ShapeAssociation {
    /// Retained pairs; every entry is an inlier.
    pub pairs: PointPairSet,
    /// Size of the raw nearest-neighbor pair set before outlier rejection.
    pub raw_count: usize,
    /// Too few consistent pairs for RANSAC; all raw pairs were kept.
    pub degenerate: bool,
}

fn count_inliers(model: &YawRigid, moved: &[Point], targets: &[Point], thr2: f64) -> usize {
    moved
        .iter()
        .zip(targets)
        .filter(|(m, t)| (model.apply(m) - *t).norm_squared() <= thr2)
        .count()
}

/// Pairs every shape point (anchored at `first_state`, moved to `state`) with
/// its nearest observed point, then keeps the RANSAC inliers. `ransac = None`
/// keeps the raw pair set.
pub fn associate_shape_with<R: Rng>(
    shape: &PointCloud,
    observed: &NnIndex,
    state: &ObjectState,
    first_state: &ObjectState,
    ransac: Option<&RansacParams>,
    rng: &mut R,
) -> ShapeAssociation {
    let motion = PlanarMotion::between(first_state, state);
    let moved: Vec<Point> = shape.iter().map(|x| motion.apply(x)).collect();
    let targets: Vec<Point> = moved.iter().map(|m| observed.nearest(m).point).collect();
    let raw_count = moved.len();
    let all = |degenerate: bool| ShapeAssociation {
        pairs: PointPairSet {
            pairs: shape
                .iter()
                .zip(&targets)
                .map(|(s, t)| PointPair {
                    source: *s,
                    target: *t,
                    inlier: true,
                })
                .collect(),
        },
        raw_count,
        degenerate,
    };
    let Some(params) = ransac else {
        return all(false);
    };
    let k = params.sample_size.max(1);
    if raw_count < k {
        return all(raw_count > 0);
    }

    let thr2 = params.threshold * params.threshold;
    let mut best: Option<(usize, YawRigid)> = None;
    for _ in 0..params.iterations {
        let idx = sample(rng, raw_count, k);
        let idx = idx.into_vec();
        let model = YawRigid::fit(idx.iter().map(|&i| (&moved[i], &targets[i])));
        if let Some(model) = model {
            let count = count_inliers(&model, &moved, &targets, thr2);
            if best.as_ref().map_or(true, |(c, _)| count > *c) {
                best = Some((count, model));
            }
        }
    }
    let Some((mut count, mut model)) = best else {
        return all(true);
    };
    // One refit on the consensus set; kept only if it does not lose support.
    let consensus: Vec<usize> = (0..raw_count)
        .filter(|&i| (model.apply(&moved[i]) - targets[i]).norm_squared() <= thr2)
        .collect();
    if let Some(refit) = YawRigid::fit(consensus.iter().map(|&i| (&moved[i], &targets[i]))) {
        let c = count_inliers(&refit, &moved, &targets, thr2);
        if c >= count {
            count = c;
            model = refit;
        }
    }
    if count < k {
        return all(true);
    }
    let pairs = shape
        .iter()
        .zip(moved.iter().zip(&targets))
        .filter(|(_, (m, t))| (model.apply(m) - *t).norm_squared() <= thr2)
        .map(|(s, (_, t))| PointPair {
            source: *s,
            target: *t,
            inlier: true,
        })
        .collect();
    ShapeAssociation {
        pairs: PointPairSet { pairs },
        raw_count,
        degenerate: false,
    }
}

pub fn associate_shape_ransac<R: Rng>(
    shape: &PointCloud,
    observed: &PointCloud,
    state: &ObjectState,
    first_state: &ObjectState,
    params: &RansacParams,
    rng: &mut R,
) -> Result<ShapeAssociation> {
    if shape.is_empty() {
        return Ok(ShapeAssociation::default());
    }
    let index = build_nn_index(observed)?;
    Ok(associate_shape_with(
        shape,
        &index,
        state,
        first_state,
        Some(params),
        rng,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::apply_motion;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> PointCloud {
        PointCloud::world(
            (0..n)
                .map(|_| {
                    Point::new(
                        rng.random_range(-spread..spread),
                        rng.random_range(-spread..spread),
                        rng.random_range(-spread / 2.0..spread / 2.0),
                    )
                })
                .collect(),
        )
    }

    fn residual_sum(pairs: &PointPairSet, delta: &MotionDelta, pivot: &ObjectState) -> f64 {
        let m = PlanarMotion::new(delta, pivot);
        pairs
            .pairs
            .iter()
            .map(|p| (m.apply(&p.source) - p.target).norm())
            .sum()
    }

    #[test]
    fn self_association_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = random_cloud(&mut rng, 100, 2.0);
        let pivot = ObjectState::new(0.3, 0.1, 0.0, 0.2);
        let pairs = associate_icp(&c, &c, &MotionDelta::ZERO, &pivot).unwrap();
        assert_eq!(pairs.len(), 100);
        assert!(pairs.pairs.iter().all(|p| p.source == p.target && p.inlier));
    }

    #[test]
    fn exact_inverse_translation_registers() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let target = random_cloud(&mut rng, 100, 2.0);
        let shift = MotionDelta::new(0.1, 0.0, 0.0, 0.0);
        let source = apply_motion(&shift, &target, &ObjectState::default());
        let pairs = associate_icp(&source, &target, &-shift, &ObjectState::default()).unwrap();
        assert!(residual_sum(&pairs, &-shift, &ObjectState::default()) < 1e-12);
    }

    #[test]
    fn icp_matches_all_pairs_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let source = random_cloud(&mut rng, 200, 3.0);
        let target = random_cloud(&mut rng, 200, 3.0);
        let delta = MotionDelta::new(0.2, -0.1, 0.05, 0.3);
        let pivot = ObjectState::new(0.5, 0.5, 0.0, 1.0);
        let pairs = associate_icp(&source, &target, &delta, &pivot).unwrap();
        let moved = apply_motion(&delta, &source, &pivot);
        for (pair, q) in pairs.pairs.iter().zip(moved.iter()) {
            let mut best = (f64::INFINITY, 0);
            for (j, t) in target.iter().enumerate() {
                let d = (q - t).norm_squared();
                if d < best.0 {
                    best = (d, j);
                }
            }
            assert_eq!(pair.target, target.points[best.1]);
        }
    }

    #[test]
    fn icp_empty_cases() {
        let c = PointCloud::world(vec![Point::origin()]);
        assert!(associate_icp(
            &c,
            &PointCloud::default(),
            &MotionDelta::ZERO,
            &ObjectState::default()
        )
        .is_err());
        let out = associate_icp(
            &PointCloud::default(),
            &c,
            &MotionDelta::ZERO,
            &ObjectState::default(),
        )
        .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn yaw_rigid_fit_recovers_motion() {
        let truth = YawRigid {
            yaw: 0.4,
            translation: [1.0, -2.0, 0.3],
        };
        let a: Vec<Point> = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.5], [0.0, 2.0, 1.0]]
            .iter()
            .map(|p| Point::new(p[0], p[1], p[2]))
            .collect();
        let b: Vec<Point> = a.iter().map(|p| truth.apply(p)).collect();
        let fit = YawRigid::fit(a.iter().zip(&b)).unwrap();
        assert!((fit.yaw - 0.4).abs() < 1e-12);
        for i in 0..3 {
            assert!((fit.translation[i] - truth.translation[i]).abs() < 1e-12);
        }
    }

    fn shape_fixture(seed: u64) -> (PointCloud, ObjectState, ObjectState) {
        // Jittered 10×6×5 lattice, 0.3 m pitch.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = ObjectState::new(2.0, 1.0, 0.75, 0.3);
        let shape = PointCloud::world(
            (0..300)
                .map(|i| {
                    Point::new(
                        first.x - 1.35 + 0.3 * (i % 10) as f64 + rng.random_range(-0.01..0.01),
                        first.y - 0.75
                            + 0.3 * ((i / 10) % 6) as f64
                            + rng.random_range(-0.01..0.01),
                        0.3 * (i / 60) as f64 + rng.random_range(-0.01..0.01),
                    )
                })
                .collect(),
        )
        .with_frame(crate::cloud::Frame::FirstFrameAnchor);
        (shape, first, ObjectState::new(5.0, 2.0, 0.75, 0.45))
    }

    #[test]
    fn noiseless_shape_keeps_everything() {
        let (shape, first, state) = shape_fixture(4);
        let observed = PlanarMotion::between(&first, &state).apply_cloud(&shape);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = associate_shape_ransac(
            &shape,
            &observed,
            &state,
            &first,
            &RansacParams::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.pairs.len(), shape.len());
        assert!(!out.degenerate);
        let m = PlanarMotion::between(&first, &state);
        assert!(out
            .pairs
            .pairs
            .iter()
            .all(|p| (m.apply(&p.source) - p.target).norm() < 1e-9));
    }

    #[test]
    fn displaced_points_are_rejected() {
        let (shape, first, state) = shape_fixture(5);
        let m = PlanarMotion::between(&first, &state);
        let mut observed = m.apply_cloud(&shape);
        let displaced: Vec<bool> = (0..shape.len()).map(|i| i % 10 < 3).collect();
        for (p, &d) in observed.points.iter_mut().zip(&displaced) {
            if d {
                p.z += 2.0;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // Below half the lattice pitch, so a lattice neighbour never passes.
        let params = RansacParams {
            threshold: 0.1,
            ..RansacParams::default()
        };
        let out =
            associate_shape_ransac(&shape, &observed, &state, &first, &params, &mut rng).unwrap();
        let kept: Vec<Point> = out.pairs.pairs.iter().map(|p| p.source).collect();
        let clean_total = displaced.iter().filter(|d| !**d).count();
        let clean_kept = shape
            .iter()
            .zip(&displaced)
            .filter(|(s, d)| !**d && kept.contains(s))
            .count();
        let dirty_kept = shape
            .iter()
            .zip(&displaced)
            .filter(|(s, d)| **d && kept.contains(s))
            .count();
        let dirty_total = shape.len() - clean_total;
        assert!(
            clean_kept as f64 >= 0.95 * clean_total as f64,
            "{clean_kept}/{clean_total}"
        );
        assert!(
            dirty_kept as f64 <= 0.05 * dirty_total as f64,
            "{dirty_kept}/{dirty_total}"
        );
    }

    #[test]
    fn empty_shape_gives_empty_pairs() {
        let (_, first, state) = shape_fixture(6);
        let observed = PointCloud::world(vec![Point::origin()]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = associate_shape_ransac(
            &PointCloud::default(),
            &observed,
            &state,
            &first,
            &RansacParams::default(),
            &mut rng,
        )
        .unwrap();
        assert!(out.pairs.is_empty());
    }

    #[test]
    fn too_few_pairs_is_degenerate() {
        let first = ObjectState::default();
        let shape = PointCloud::world(vec![Point::new(0.0, 0.0, 0.0), Point::new(1.0, 0.0, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = associate_shape_ransac(
            &shape,
            &shape,
            &first,
            &first,
            &RansacParams::default(),
            &mut rng,
        )
        .unwrap();
        assert!(out.degenerate);
        assert_eq!(out.pairs.len(), 2);
    }
}
