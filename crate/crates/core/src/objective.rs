//! Per-frame registration loss and its gradient with respect to the frame
//! motion `[Δx, Δy, Δz, Δθ]`.
//!
//! The loss is a weighted sum of four terms:
//!
//! * registration: mean squared distance between previous-frame object points
//!   moved by the motion (about `S_{k−1}`) and their nearest observed points;
//! * shape: the same for the aggregated shape moved by `S_k − S̃₁` about `S̃₁`;
//! * motion consistency: `(‖[Δx, Δy]‖·cos((θ_{k−1}+θ_k)/2) − Δx)²`;
//! * motion prior: `‖ΔS − ΔS_prior‖²` with the angle difference wrapped.
//!
//! Correspondences are frozen inside a [`LossContext`]; the gradient treats
//! them as constants.

use serde::{Deserialize, Serialize};

use crate::association::PointPairSet;
use crate::state::{normalize_angle, MotionDelta, ObjectState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub icp: f64,
    pub shape: f64,
    pub motion_consistency: f64,
    pub motion_prior: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            icp: 1.0,
            shape: 1.0,
            motion_consistency: 0.1,
            motion_prior: 0.1,
        }
    }
}

impl LossWeights {
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            icp: self.icp * c,
            shape: self.shape * c,
            motion_consistency: self.motion_consistency * c,
            motion_prior: self.motion_prior * c,
        }
    }
}

/// Squared-residual term over frozen pairs, with the pair geometry
/// pre-centered on the pivot:
/// `r = R(φ₀ + Δθ)·u + w + t₀ + Δ`, where `u = p − pivot`, `w = pivot − q`.
#[derive(Clone, Debug, Default)]
struct PairTerm {
    u: Vec<[f64; 2]>,
    w: Vec<[f64; 2]>,
    z0: Vec<f64>,
    phi0: f64,
    t0: [f64; 3],
}

impl PairTerm {
    fn new(pairs: &PointPairSet, pivot: &ObjectState, phi0: f64, t0: [f64; 3]) -> Self {
        let mut term = PairTerm {
            phi0,
            t0,
            ..Default::default()
        };
        for p in pairs.inliers() {
            term.u.push([p.source.x - pivot.x, p.source.y - pivot.y]);
            term.w.push([pivot.x - p.target.x, pivot.y - p.target.y]);
            term.z0.push(p.source.z - p.target.z);
        }
        term
    }

    fn len(&self) -> usize {
        self.u.len()
    }

    fn value(&self, d: &[f64; 4]) -> f64 {
        if self.u.is_empty() {
            return 0.0;
        }
        let (s, c) = (self.phi0 + d[3]).sin_cos();
        let (ox, oy, oz) = (self.t0[0] + d[0], self.t0[1] + d[1], self.t0[2] + d[2]);
        let mut sum = 0.0;
        for i in 0..self.u.len() {
            let [ux, uy] = self.u[i];
            let rx = c * ux - s * uy + self.w[i][0] + ox;
            let ry = s * ux + c * uy + self.w[i][1] + oy;
            let rz = self.z0[i] + oz;
            sum += rx * rx + ry * ry + rz * rz;
        }
        sum / self.u.len() as f64
    }

    fn value_and_gradient(&self, d: &[f64; 4]) -> (f64, [f64; 4]) {
        if self.u.is_empty() {
            return (0.0, [0.0; 4]);
        }
        let (s, c) = (self.phi0 + d[3]).sin_cos();
        let (ox, oy, oz) = (self.t0[0] + d[0], self.t0[1] + d[1], self.t0[2] + d[2]);
        let mut sum = 0.0;
        let mut g = [0.0; 4];
        for i in 0..self.u.len() {
            let [ux, uy] = self.u[i];
            let rx = c * ux - s * uy + self.w[i][0] + ox;
            let ry = s * ux + c * uy + self.w[i][1] + oy;
            let rz = self.z0[i] + oz;
            sum += rx * rx + ry * ry + rz * rz;
            g[0] += rx;
            g[1] += ry;
            g[2] += rz;
            // d/dθ of R·u
            g[3] += rx * (-s * ux - c * uy) + ry * (c * ux - s * uy);
        }
        let n = self.u.len() as f64;
        (sum / n, g.map(|v| 2.0 * v / n))
    }
}

/// Everything a frame solve holds fixed: frozen pair sets, the previous and
/// first-frame states, and the motion prior.
#[derive(Clone, Debug)]
pub struct LossContext {
    pub prev_state: ObjectState,
    pub first_state: ObjectState,
    pub prior: MotionDelta,
    icp: PairTerm,
    shape: PairTerm,
}

impl LossContext {
    pub fn new(
        icp_pairs: &PointPairSet,
        shape_pairs: &PointPairSet,
        prev_state: ObjectState,
        first_state: ObjectState,
        prior: MotionDelta,
    ) -> Self {
        let icp = PairTerm::new(icp_pairs, &prev_state, 0.0, [0.0; 3]);
        let base = prev_state.delta_from(&first_state);
        let shape = PairTerm::new(
            shape_pairs,
            &first_state,
            base.dtheta,
            [base.dx, base.dy, base.dz],
        );
        Self {
            prev_state,
            first_state,
            prior,
            icp,
            shape,
        }
    }

    pub fn icp_pair_count(&self) -> usize {
        self.icp.len()
    }

    pub fn shape_pair_count(&self) -> usize {
        self.shape.len()
    }
}

/// Individual term values and the weighted total at one motion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub icp: f64,
    pub shape: f64,
    pub motion_consistency: f64,
    pub motion_prior: f64,
    pub total: f64,
    /// Registration pair set was empty; the term contributed zero.
    pub icp_empty: bool,
    /// Shape inlier set was empty; the term contributed zero.
    pub shape_empty: bool,
}

pub fn icp_term(delta: &MotionDelta, ctx: &LossContext) -> f64 {
    ctx.icp.value(&delta.as_array())
}

pub fn shape_term(delta: &MotionDelta, ctx: &LossContext) -> f64 {
    ctx.shape.value(&delta.as_array())
}

fn mc_value_and_gradient(d: &[f64; 4], ctx: &LossContext) -> (f64, [f64; 4]) {
    let speed = d[0].hypot(d[1]);
    // θ_k is taken unwrapped so the mean heading stays on the right branch.
    let mean = ctx.prev_state.theta + d[3] / 2.0;
    let (s, c) = mean.sin_cos();
    let f = speed * c - d[0];
    let (ux, uy) = if speed > 0.0 {
        (d[0] / speed, d[1] / speed)
    } else {
        (0.0, 0.0)
    };
    let df = [ux * c - 1.0, uy * c, 0.0, -speed * s / 2.0];
    (f * f, df.map(|v| 2.0 * f * v))
}

pub fn motion_consistency_term(delta: &MotionDelta, ctx: &LossContext) -> f64 {
    mc_value_and_gradient(&delta.as_array(), ctx).0
}

fn mp_residual(d: &[f64; 4], prior: &MotionDelta) -> [f64; 4] {
    [
        d[0] - prior.dx,
        d[1] - prior.dy,
        d[2] - prior.dz,
        normalize_angle(d[3] - prior.dtheta),
    ]
}

pub fn motion_prior_term(delta: &MotionDelta, ctx: &LossContext) -> f64 {
    mp_residual(&delta.as_array(), &ctx.prior)
        .iter()
        .map(|r| r * r)
        .sum()
}

/// Weighted loss and its gradient at the raw parameter vector
/// `[Δx, Δy, Δz, Δθ]`.
pub fn loss_value_and_gradient(
    d: &[f64; 4],
    ctx: &LossContext,
    weights: &LossWeights,
) -> (f64, [f64; 4]) {
    let mut total = 0.0;
    let mut grad = [0.0; 4];
    let mut add = |w: f64, (v, g): (f64, [f64; 4])| {
        if w != 0.0 {
            total += w * v;
            for i in 0..4 {
                grad[i] += w * g[i];
            }
        }
    };
    add(weights.icp, ctx.icp.value_and_gradient(d));
    add(weights.shape, ctx.shape.value_and_gradient(d));
    add(weights.motion_consistency, mc_value_and_gradient(d, ctx));
    let r = mp_residual(d, &ctx.prior);
    add(
        weights.motion_prior,
        (r.iter().map(|v| v * v).sum(), r.map(|v| 2.0 * v)),
    );
    (total, grad)
}

pub fn total_loss(delta: &MotionDelta, ctx: &LossContext, weights: &LossWeights) -> f64 {
    loss_value_and_gradient(&delta.as_array(), ctx, weights).0
}

pub fn loss_gradient(delta: &MotionDelta, ctx: &LossContext, weights: &LossWeights) -> [f64; 4] {
    loss_value_and_gradient(&delta.as_array(), ctx, weights).1
}

pub fn breakdown(delta: &MotionDelta, ctx: &LossContext, weights: &LossWeights) -> LossBreakdown {
    let icp = icp_term(delta, ctx);
    let shape = shape_term(delta, ctx);
    let motion_consistency = motion_consistency_term(delta, ctx);
    let motion_prior = motion_prior_term(delta, ctx);
    LossBreakdown {
        icp,
        shape,
        motion_consistency,
        motion_prior,
        total: weighted_sum(weights, [icp, shape, motion_consistency, motion_prior]),
        icp_empty: ctx.icp.len() == 0,
        shape_empty: ctx.shape.len() == 0,
    }
}

/// `w_I·a + w_S·b + w_MC·c + w_MP·d`.
pub fn weighted_sum(weights: &LossWeights, terms: [f64; 4]) -> f64 {
    weights.icp * terms[0]
        + weights.shape * terms[1]
        + weights.motion_consistency * terms[2]
        + weights.motion_prior * terms[3]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::PointPair;
    use crate::cloud::{apply_motion, PlanarMotion, Point, PointCloud};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairs(list: &[([f64; 3], [f64; 3])]) -> PointPairSet {
        PointPairSet {
            pairs: list
                .iter()
                .map(|(a, b)| PointPair {
                    source: Point::new(a[0], a[1], a[2]),
                    target: Point::new(b[0], b[1], b[2]),
                    inlier: true,
                })
                .collect(),
        }
    }

    fn ctx_with(icp: PointPairSet, shape: PointPairSet, prev: ObjectState) -> LossContext {
        LossContext::new(
            &icp,
            &shape,
            prev,
            ObjectState::default(),
            MotionDelta::ZERO,
        )
    }

    #[test]
    fn icp_examples() {
        let c = ctx_with(
            pairs(&[([1.0, 2.0, 0.0], [1.0, 2.0, 0.0])]),
            PointPairSet::default(),
            ObjectState::default(),
        );
        assert_eq!(icp_term(&MotionDelta::ZERO, &c), 0.0);
        let c = ctx_with(
            pairs(&[([0.0, 0.0, 0.0], [1.0, 0.0, 0.0])]),
            PointPairSet::default(),
            ObjectState::default(),
        );
        assert!((icp_term(&MotionDelta::ZERO, &c) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn icp_matches_direct_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let list: Vec<_> = (0..50)
            .map(|_| {
                let a = [
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(0.0..2.0),
                ];
                let b = [
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(0.0..2.0),
                ];
                (a, b)
            })
            .collect();
        let set = pairs(&list);
        let prev = ObjectState::new(1.0, -0.5, 0.8, 2.0);
        let c = ctx_with(set.clone(), PointPairSet::default(), prev);
        let delta = MotionDelta::new(0.3, 0.2, -0.1, 0.25);
        let src = PointCloud::world(set.pairs.iter().map(|p| p.source).collect());
        let moved = apply_motion(&delta, &src, &prev);
        let expected: f64 = moved
            .iter()
            .zip(&set.pairs)
            .map(|(m, p)| (m - p.target).norm_squared())
            .sum::<f64>()
            / 50.0;
        assert!((icp_term(&delta, &c) - expected).abs() < 1e-12);
    }

    #[test]
    fn shape_term_uniform_offset() {
        let first = ObjectState::new(1.0, 2.0, 0.7, 0.4);
        let truth = ObjectState::new(4.0, 3.0, 0.7, 0.6);
        let prev = ObjectState::new(3.0, 2.5, 0.7, 0.5);
        let m = PlanarMotion::between(&first, &truth);
        let shape: Vec<Point> = (0..20)
            .map(|i| Point::new(1.0 + 0.1 * i as f64, 2.0, 0.5))
            .collect();
        let exact = PointPairSet {
            pairs: shape
                .iter()
                .map(|p| PointPair {
                    source: *p,
                    target: m.apply(p),
                    inlier: true,
                })
                .collect(),
        };
        let shifted = PointPairSet {
            pairs: exact
                .pairs
                .iter()
                .map(|p| PointPair {
                    target: p.target + nalgebra::Vector3::new(0.2, 0.0, 0.0),
                    ..*p
                })
                .collect(),
        };
        let true_delta = truth.delta_from(&prev);
        let c = LossContext::new(
            &PointPairSet::default(),
            &exact,
            prev,
            first,
            MotionDelta::ZERO,
        );
        assert!(shape_term(&true_delta, &c) < 1e-24);
        let c = LossContext::new(
            &PointPairSet::default(),
            &shifted,
            prev,
            first,
            MotionDelta::ZERO,
        );
        assert!((shape_term(&true_delta, &c) - 0.04).abs() < 1e-12);
    }

    #[test]
    fn outlier_pairs_are_ignored() {
        let mut set = pairs(&[
            ([0.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
            ([0.0, 0.0, 0.0], [9.0, 0.0, 0.0]),
        ]);
        set.pairs[1].inlier = false;
        let c = LossContext::new(
            &PointPairSet::default(),
            &set,
            ObjectState::default(),
            ObjectState::default(),
            MotionDelta::ZERO,
        );
        assert_eq!(c.shape_pair_count(), 1);
        assert_eq!(shape_term(&MotionDelta::ZERO, &c), 0.0);
    }

    #[test]
    fn motion_consistency_examples() {
        let c = ctx_with(
            PointPairSet::default(),
            PointPairSet::default(),
            ObjectState::default(),
        );
        assert_eq!(
            motion_consistency_term(&MotionDelta::new(1.0, 0.0, 0.0, 0.0), &c),
            0.0
        );
        assert!(
            (motion_consistency_term(&MotionDelta::new(0.0, 1.0, 0.0, 0.0), &c) - 1.0).abs()
                < 1e-15
        );
        assert_eq!(
            motion_consistency_term(&MotionDelta::new(0.0, 0.0, 0.4, 0.3), &c),
            0.0
        );
    }

    #[test]
    fn motion_prior_examples() {
        let prior = MotionDelta::new(0.5, 0.1, 0.0, 0.2);
        let c = LossContext::new(
            &PointPairSet::default(),
            &PointPairSet::default(),
            ObjectState::default(),
            ObjectState::default(),
            prior,
        );
        assert_eq!(motion_prior_term(&prior, &c), 0.0);
        let d = MotionDelta::new(0.6, 0.1, 0.0, 0.2);
        assert!((motion_prior_term(&d, &c) - 0.01).abs() < 1e-12);

        let prior = MotionDelta::new(0.0, 0.0, 0.0, -3.1);
        let c = LossContext::new(
            &PointPairSet::default(),
            &PointPairSet::default(),
            ObjectState::default(),
            ObjectState::default(),
            prior,
        );
        let d = MotionDelta::new(0.0, 0.0, 0.0, 3.1);
        let wrapped = 6.2 - 2.0 * std::f64::consts::PI;
        assert!((wrapped - (-0.0832)).abs() < 1e-4);
        assert!((motion_prior_term(&d, &c) - wrapped * wrapped).abs() < 1e-12);
        assert!((motion_prior_term(&d, &c) - 0.00692).abs() < 1e-5);
    }

    #[test]
    fn weighted_total_arithmetic() {
        assert!((weighted_sum(&LossWeights::default(), [1.0, 2.0, 3.0, 4.0]) - 3.7).abs() < 1e-12);
        let c = ctx_with(
            PointPairSet::default(),
            PointPairSet::default(),
            ObjectState::default(),
        );
        assert_eq!(
            total_loss(&MotionDelta::ZERO, &c, &LossWeights::default()),
            0.0
        );
    }

    #[test]
    fn empty_pairs_are_flagged() {
        let c = ctx_with(
            PointPairSet::default(),
            PointPairSet::default(),
            ObjectState::default(),
        );
        let b = breakdown(
            &MotionDelta::new(0.1, 0.0, 0.0, 0.0),
            &c,
            &LossWeights::default(),
        );
        assert!(b.icp_empty && b.shape_empty);
        assert_eq!(b.icp, 0.0);
    }

    #[test]
    fn prior_gradient_alone() {
        let prior = MotionDelta::new(0.5, -0.2, 0.1, 0.05);
        let c = LossContext::new(
            &PointPairSet::default(),
            &PointPairSet::default(),
            ObjectState::default(),
            ObjectState::default(),
            prior,
        );
        let w = LossWeights {
            icp: 0.0,
            shape: 0.0,
            motion_consistency: 0.0,
            motion_prior: 1.0,
        };
        let d = MotionDelta::new(0.1, 0.2, 0.3, 0.4);
        let g = loss_gradient(&d, &c, &w);
        let expected = (d - prior).as_array().map(|v| 2.0 * v);
        for i in 0..4 {
            assert!((g[i] - expected[i]).abs() < 1e-12);
        }
    }
}
