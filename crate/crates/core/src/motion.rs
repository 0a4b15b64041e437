//! Motion records derived from tracked states: per-frame deltas, windowed
//! cumulative displacement and, with ground truth, the displacement error as
//! a function of the horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{MotionDelta, ObjectState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionRecord {
    /// 1-based frame number.
    pub frame: usize,
    /// `S_k − S_{k−1}`; zero for the first frame.
    pub delta: MotionDelta,
    /// `S_{k+h} − S_k` with `h` the window, cut at the last frame.
    pub cumulative: MotionDelta,
    pub horizon: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionExport {
    pub window: usize,
    /// The requested window exceeded the sequence and was shortened.
    pub clamped: bool,
    pub records: Vec<MotionRecord>,
    /// `(h, mean ‖(S_{s+h} − S_s) − (G_{s+h} − G_s)‖)` over all starts `s`,
    /// for `h = 1..=window`.
    pub deviation: Option<Vec<(usize, f64)>>,
}

fn displacement_error(est: &[ObjectState], gt: &[ObjectState], s: usize, h: usize) -> f64 {
    let e = est[s + h].delta_from(&est[s]);
    let g = gt[s + h].delta_from(&gt[s]);
    ((e.dx - g.dx).powi(2) + (e.dy - g.dy).powi(2) + (e.dz - g.dz).powi(2)).sqrt()
}

/// Mean displacement error at every horizon `1..=max_horizon`.
pub fn deviation_curve(
    est: &[ObjectState],
    gt: &[ObjectState],
    max_horizon: usize,
) -> Result<Vec<(usize, f64)>> {
    if est.len() != gt.len() {
        return Err(Error::LengthMismatch(format!(
            "{} estimated states vs {} ground-truth states",
            est.len(),
            gt.len()
        )));
    }
    let n = est.len();
    Ok((1..=max_horizon.min(n.saturating_sub(1)))
        .map(|h| {
            let starts = n - h;
            let sum: f64 = (0..starts).map(|s| displacement_error(est, gt, s, h)).sum();
            (h, sum / starts as f64)
        })
        .collect())
}

/// Motion records for `states` (every frame, the first included).
pub fn export_motion(
    states: &[ObjectState],
    window: usize,
    gt: Option<&[ObjectState]>,
) -> Result<MotionExport> {
    if states.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 states, got {}",
            states.len()
        )));
    }
    if window == 0 {
        return Err(Error::InvalidInput(
            "window must be at least 1 frame".into(),
        ));
    }
    let last = states.len() - 1;
    let clamped = window > last;
    let window = window.min(last);
    let records = (0..states.len())
        .map(|k| {
            let end = (k + window).min(last);
            MotionRecord {
                frame: k + 1,
                delta: if k == 0 {
                    MotionDelta::ZERO
                } else {
                    states[k].delta_from(&states[k - 1])
                },
                cumulative: states[end].delta_from(&states[k]),
                horizon: end - k,
            }
        })
        .collect();
    let deviation = gt.map(|g| deviation_curve(states, g, window)).transpose()?;
    Ok(MotionExport {
        window,
        clamped,
        records,
        deviation,
    })
}
