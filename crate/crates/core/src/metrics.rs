//! Single-pass evaluation: frame-pooled accuracy, the robustness curve and
//! the chamfer shape distance.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cloud::{points_in_box, Point, PointCloud};
use crate::error::{Error, Result};
use crate::iou::box_iou;
use crate::kdtree::NnIndex;
use crate::state::{BoundingBox, ObjectState};

/// Threshold samples `t = 0, 0.05, ..., 1.0`.
pub const ROBUSTNESS_SAMPLES: usize = 21;
/// Voxel edge used before computing shape distances, meters.
pub const SHAPE_VOXEL: f64 = 0.05;
pub const HARD_BELOW: f64 = 38.2;
pub const EASY_ABOVE: f64 = 808.3;

/// Per-frame IoU between estimated states and ground-truth boxes. The
/// estimate borrows the ground-truth size.
pub fn frame_ious(estimated: &[ObjectState], gt: &[BoundingBox]) -> Result<Vec<f64>> {
    if estimated.len() != gt.len() {
        return Err(Error::LengthMismatch(format!(
            "{} estimated states vs {} ground-truth boxes",
            estimated.len(),
            gt.len()
        )));
    }
    Ok(estimated
        .iter()
        .zip(gt)
        .map(|(s, b)| box_iou(&BoundingBox::new(*s, b.size), b))
        .collect())
}

/// Sum of per-frame IoUs over all tracklets divided by the total frame count.
pub fn accuracy(ious: &[Vec<f64>]) -> f64 {
    let frames: usize = ious.iter().map(Vec::len).sum();
    if frames == 0 {
        return 0.0;
    }
    ious.iter().flatten().sum::<f64>() / frames as f64
}

/// IoU shortfall treated as equality. States are stored with 9 significant
/// digits, which moves the IoU of a perfect estimate by about 1e-8; without
/// the slack such an estimate would fail at `t = 1`.
pub const IOU_SLACK: f64 = 1e-6;

/// Frames tracked before the IoU first drops below `t`. A failure at 1-based
/// frame `f` gives `f − 1`.
pub fn tracking_length(ious: &[f64], t: f64) -> usize {
    ious.iter()
        .position(|&iou| iou < t - IOU_SLACK)
        .unwrap_or(ious.len())
}

pub fn robustness_threshold(i: usize) -> f64 {
    i as f64 / (ROBUSTNESS_SAMPLES - 1) as f64
}

/// `(Rob, [(t, Rob(t))])`; Rob is the mean of the 21 curve samples.
pub fn robustness(ious: &[Vec<f64>]) -> (f64, Vec<(f64, f64)>) {
    let total: usize = ious.iter().map(Vec::len).sum();
    let curve: Vec<(f64, f64)> = (0..ROBUSTNESS_SAMPLES)
        .map(|i| {
            let t = robustness_threshold(i);
            let tracked: usize = ious.iter().map(|seq| tracking_length(seq, t)).sum();
            let r = if total == 0 {
                0.0
            } else {
                tracked as f64 / total as f64
            };
            (t, r)
        })
        .collect();
    let rob = curve.iter().map(|(_, r)| r).sum::<f64>() / ROBUSTNESS_SAMPLES as f64;
    (rob, curve)
}

/// Accuracy straight from states, one `(estimated, gt)` pair per tracklet.
pub fn accuracy_from_states(results: &[Vec<ObjectState>], gt: &[Vec<BoundingBox>]) -> Result<f64> {
    Ok(accuracy(&pooled_ious(results, gt)?))
}

pub fn robustness_from_states(
    results: &[Vec<ObjectState>],
    gt: &[Vec<BoundingBox>],
) -> Result<(f64, Vec<(f64, f64)>)> {
    Ok(robustness(&pooled_ious(results, gt)?))
}

fn pooled_ious(results: &[Vec<ObjectState>], gt: &[Vec<BoundingBox>]) -> Result<Vec<Vec<f64>>> {
    if results.len() != gt.len() {
        return Err(Error::LengthMismatch(format!(
            "{} result tracklets vs {} ground-truth tracklets",
            results.len(),
            gt.len()
        )));
    }
    results
        .iter()
        .zip(gt)
        .map(|(r, g)| frame_ious(r, g))
        .collect()
}

/// Replaces the points of every occupied voxel (grid anchored at the origin)
/// by their centroid. Output order follows first occupancy.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> PointCloud {
    let mut slots: HashMap<(i64, i64, i64), usize> = HashMap::new();
    let mut sums: Vec<([f64; 3], usize)> = Vec::new();
    for p in cloud.iter() {
        let key = (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        );
        let slot = *slots.entry(key).or_insert_with(|| {
            sums.push(([0.0; 3], 0));
            sums.len() - 1
        });
        let (s, n) = &mut sums[slot];
        s[0] += p.x;
        s[1] += p.y;
        s[2] += p.z;
        *n += 1;
    }
    PointCloud::new(
        sums.into_iter()
            .map(|(s, n)| {
                let n = n as f64;
                Point::new(s[0] / n, s[1] / n, s[2] / n)
            })
            .collect(),
        cloud.frame,
    )
}

fn mean_nn_distance(from: &PointCloud, to: &NnIndex) -> f64 {
    from.iter()
        .map(|p| to.nearest(p).distance_squared.sqrt())
        .sum::<f64>()
        / from.len() as f64
}

/// Symmetric mean nearest-neighbor distance, without downsampling.
pub fn chamfer_raw(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyShape);
    }
    let ia = NnIndex::build(a)?;
    let ib = NnIndex::build(b)?;
    Ok(mean_nn_distance(a, &ib) + mean_nn_distance(b, &ia))
}

/// Chamfer distance after downsampling both clouds to 5 cm voxels.
pub fn chamfer(shape: &PointCloud, gt_shape: &PointCloud) -> Result<f64> {
    chamfer_with_voxel(shape, gt_shape, SHAPE_VOXEL)
}

pub fn chamfer_with_voxel(shape: &PointCloud, gt_shape: &PointCloud, voxel: f64) -> Result<f64> {
    if shape.is_empty() || gt_shape.is_empty() {
        return Err(Error::EmptyShape);
    }
    chamfer_raw(
        &voxel_downsample(shape, voxel),
        &voxel_downsample(gt_shape, voxel),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn from_mean_points(mean: f64) -> Self {
        if mean < HARD_BELOW {
            Difficulty::Hard
        } else if mean <= EASY_ABOVE {
            Difficulty::Medium
        } else {
            Difficulty::Easy
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

/// Mean in-box point count over the first ten frames (fewer if the
/// sequence is shorter), using ground-truth boxes where annotated.
pub fn initial_point_density(frames: &[PointCloud], boxes: &[BoundingBox]) -> f64 {
    let n = frames.len().min(10);
    if n == 0 {
        return 0.0;
    }
    let total: usize = (0..n)
        .map(|i| {
            let b = boxes.get(i).or(boxes.first()).expect("at least one box");
            points_in_box(&frames[i], &b.state, &b.size, 1.0).len()
        })
        .sum();
    total as f64 / n as f64
}

/// Labels every tracklet by the density of its first ten frames.
pub fn split_by_difficulty(tracklets: &[crate::cloud::Tracklet]) -> Vec<Difficulty> {
    tracklets
        .iter()
        .map(|t| {
            let boxes = t.gt_boxes().unwrap_or_else(|| vec![t.first_box]);
            Difficulty::from_mean_points(initial_point_density(&t.frames, &boxes))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackletScore {
    pub id: String,
    pub difficulty: Difficulty,
    pub frames: usize,
    pub acc: f64,
    pub rob: f64,
    pub shape_cd: Option<f64>,
}

/// Scores of one split (or all tracklets).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub tracklets: usize,
    pub acc: f64,
    pub rob: f64,
    pub rob_curve: Vec<(f64, f64)>,
    /// Mean chamfer distance over tracklets that have shapes.
    pub shape_cd: Option<f64>,
    pub per_tracklet: Vec<TrackletScore>,
}

/// Everything needed to score one tracklet.
#[derive(Clone, Debug)]
pub struct EvalInput {
    pub id: String,
    pub difficulty: Difficulty,
    pub ious: Vec<f64>,
    pub shape_cd: Option<f64>,
}

pub fn report(split: &str, inputs: &[&EvalInput]) -> EvalReport {
    let ious: Vec<Vec<f64>> = inputs.iter().map(|i| i.ious.clone()).collect();
    let (rob, rob_curve) = robustness(&ious);
    let cds: Vec<f64> = inputs.iter().filter_map(|i| i.shape_cd).collect();
    EvalReport {
        split: split.to_string(),
        tracklets: inputs.len(),
        acc: accuracy(&ious),
        rob,
        rob_curve,
        shape_cd: if cds.is_empty() {
            None
        } else {
            Some(cds.iter().sum::<f64>() / cds.len() as f64)
        },
        per_tracklet: inputs
            .iter()
            .map(|i| TrackletScore {
                id: i.id.clone(),
                difficulty: i.difficulty,
                frames: i.ious.len(),
                acc: accuracy(std::slice::from_ref(&i.ious)),
                rob: robustness(std::slice::from_ref(&i.ious)).0,
                shape_cd: i.shape_cd,
            })
            .collect(),
    }
}

/// Reports for all tracklets followed by the easy, medium and hard splits.
pub fn split_reports(inputs: &[EvalInput]) -> Vec<EvalReport> {
    let mut out = vec![report("all", &inputs.iter().collect::<Vec<_>>())];
    for d in [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard] {
        let subset: Vec<&EvalInput> = inputs.iter().filter(|i| i.difficulty == d).collect();
        out.push(report(d.label(), &subset));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::BoxSize;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[vec![1.0, 0.5, 0.0, 0.5]]), 0.5);
        let pooled = accuracy(&[vec![1.0; 10], vec![0.5; 30]]);
        assert!((pooled - 0.625).abs() < 1e-15);
    }

    #[test]
    fn perfect_states_score_one() {
        let size = BoxSize::new(4.0, 2.0, 1.5).unwrap();
        let states: Vec<ObjectState> = (0..20)
            .map(|i| ObjectState::new(i as f64, 0.0, 0.75, 0.1))
            .collect();
        let gt: Vec<BoundingBox> = states.iter().map(|s| BoundingBox::new(*s, size)).collect();
        assert!(
            (accuracy_from_states(&[states.clone()], &[gt.clone()]).unwrap() - 1.0).abs() < 1e-12
        );
        assert!((robustness_from_states(&[states], &[gt]).unwrap().0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_lengths_error() {
        let size = BoxSize::new(4.0, 2.0, 1.5).unwrap();
        let gt = vec![BoundingBox::new(ObjectState::default(), size); 3];
        assert!(frame_ious(&[ObjectState::default(); 2], &gt).is_err());
        assert!(accuracy_from_states(&[vec![]], &[]).is_err());
    }

    #[test]
    fn robustness_examples() {
        let (rob, curve) = robustness(&[vec![1.0; 50]]);
        assert_eq!(rob, 1.0);
        assert!(curve.iter().all(|(_, r)| *r == 1.0));

        let (rob, curve) = robustness(&[vec![0.6; 100]]);
        assert!((rob - 13.0 / 21.0).abs() < 1e-15);
        assert!((rob - 0.6190).abs() < 1e-4);
        assert_eq!(curve.iter().filter(|(_, r)| *r == 1.0).count(), 13);

        let mut ious = vec![1.0; 100];
        for v in ious.iter_mut().skip(50) {
            *v = 0.3;
        }
        assert_eq!(tracking_length(&ious, 0.5), 50);
        let (_, curve) = robustness(&[ious]);
        assert_eq!(curve[10], (0.5, 0.5));
    }

    #[test]
    fn serialization_noise_does_not_fail_at_full_overlap() {
        assert_eq!(tracking_length(&[1.0, 1.0 - 1e-8, 1.0], 1.0), 3);
        assert_eq!(tracking_length(&[1.0, 0.999, 1.0], 1.0), 1);
    }

    #[test]
    fn immediate_loss_tracks_zero_frames() {
        assert_eq!(tracking_length(&[0.1, 1.0, 1.0], 0.5), 0);
    }

    #[test]
    fn chamfer_examples() {
        let a = PointCloud::world(vec![Point::new(0.0, 0.0, 0.0)]);
        let b = PointCloud::world(vec![Point::new(1.0, 0.0, 0.0)]);
        assert!((chamfer(&a, &b).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert!(matches!(
            chamfer(&a, &PointCloud::default()),
            Err(Error::EmptyShape)
        ));
    }

    #[test]
    fn voxel_centroids() {
        let c = PointCloud::world(vec![
            Point::new(0.01, 0.01, 0.01),
            Point::new(0.03, 0.03, 0.03),
            Point::new(-0.01, 0.0, 0.0),
        ]);
        let d = voxel_downsample(&c, 0.05);
        assert_eq!(d.len(), 2);
        assert!((d.points[0] - Point::new(0.02, 0.02, 0.02)).norm() < 1e-12);
    }

    #[test]
    fn difficulty_thresholds() {
        assert_eq!(Difficulty::from_mean_points(20.0), Difficulty::Hard);
        assert_eq!(Difficulty::from_mean_points(500.0), Difficulty::Medium);
        assert_eq!(Difficulty::from_mean_points(1000.0), Difficulty::Easy);
        assert_eq!(Difficulty::from_mean_points(38.2), Difficulty::Medium);
        assert_eq!(Difficulty::from_mean_points(808.3), Difficulty::Medium);
    }
}
