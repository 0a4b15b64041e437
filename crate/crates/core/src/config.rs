//! Flat key-value run configuration (TOML). Every tunable constant has its own
//! key; omitted keys take the defaults below and unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::association::RansacParams;
use crate::error::{Error, Result};
use crate::metrics::SHAPE_VOXEL;
use crate::objective::LossWeights;
use crate::optimizer::SolverConfig;
use crate::preprocess::GroundParams;
use crate::tracker::{ShapeMode, TrackerConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: f64,
    pub gamma_in: f64,
    pub gamma_aft: f64,
    pub gamma_first: f64,
    pub keyframe_interval: usize,
    pub subshape_window: usize,
    pub shape_mode: ShapeMode,

    pub w_icp: f64,
    pub w_shape: f64,
    pub w_mc: f64,
    pub w_mp: f64,

    pub max_outer_iterations: usize,
    pub outer_tolerance: f64,
    pub max_inner_iterations: usize,

    pub ground_removal: bool,
    pub ground_threshold: f64,
    pub ground_iterations: usize,
    pub ground_seed_fraction: f64,
    pub ground_min_inlier_fraction: f64,
    pub ground_max_slope_deg: f64,
    pub ground_max_rms_ratio: f64,

    pub ransac: bool,
    pub ransac_iterations: usize,
    pub ransac_threshold: f64,
    pub ransac_sample_size: usize,

    pub chamfer_voxel: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrackerConfig::default();
        let w = LossWeights::default();
        let s = SolverConfig::default();
        let g = GroundParams::default();
        let r = RansacParams::default();
        Self {
            alpha: t.alpha,
            gamma_in: t.gamma_in,
            gamma_aft: t.gamma_aft,
            gamma_first: t.gamma_first,
            keyframe_interval: t.keyframe_interval,
            subshape_window: t.subshape_window,
            shape_mode: t.shape_mode,
            w_icp: w.icp,
            w_shape: w.shape,
            w_mc: w.motion_consistency,
            w_mp: w.motion_prior,
            max_outer_iterations: s.max_outer_iterations,
            outer_tolerance: s.outer_tolerance,
            max_inner_iterations: s.max_inner_iterations,
            ground_removal: true,
            ground_threshold: g.threshold,
            ground_iterations: g.iterations,
            ground_seed_fraction: g.seed_fraction,
            ground_min_inlier_fraction: g.min_inlier_fraction,
            ground_max_slope_deg: g.max_slope_deg,
            ground_max_rms_ratio: g.max_rms_ratio,
            ransac: true,
            ransac_iterations: r.iterations,
            ransac_threshold: r.threshold,
            ransac_sample_size: r.sample_size,
            chamfer_voxel: SHAPE_VOXEL,
            seed: r.seed,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        for (name, g) in [
            ("gamma_in", self.gamma_in),
            ("gamma_aft", self.gamma_aft),
            ("gamma_first", self.gamma_first),
        ] {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, w) in [
            ("w_icp", self.w_icp),
            ("w_shape", self.w_shape),
            ("w_mc", self.w_mc),
            ("w_mp", self.w_mp),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
        }
        if self.max_outer_iterations == 0 {
            return bad("max_outer_iterations must be at least 1");
        }
        if !(self.ground_threshold > 0.0)
            || !(self.ground_seed_fraction > 0.0 && self.ground_seed_fraction <= 1.0)
        {
            return bad("ground_threshold must be positive and ground_seed_fraction in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.ground_min_inlier_fraction) {
            return bad("ground_min_inlier_fraction must lie in [0, 1]");
        }
        if !(self.ground_max_slope_deg > 0.0 && self.ground_max_slope_deg < 90.0) {
            return bad("ground_max_slope_deg must lie in (0, 90)");
        }
        if !(self.ground_max_rms_ratio > 0.0) {
            return bad("ground_max_rms_ratio must be positive");
        }
        if self.ransac_sample_size < 2 || !(self.ransac_threshold > 0.0) {
            return bad("ransac_sample_size must be at least 2 and ransac_threshold positive");
        }
        if !(self.chamfer_voxel > 0.0) {
            return bad("chamfer_voxel must be positive");
        }
        Ok(())
    }

    pub fn tracker(&self) -> TrackerConfig {
        TrackerConfig {
            alpha: self.alpha,
            gamma_in: self.gamma_in,
            gamma_aft: self.gamma_aft,
            gamma_first: self.gamma_first,
            keyframe_interval: self.keyframe_interval,
            subshape_window: self.subshape_window,
            shape_mode: self.shape_mode,
            ground: self.ground_removal.then_some(GroundParams {
                threshold: self.ground_threshold,
                iterations: self.ground_iterations,
                seed_fraction: self.ground_seed_fraction,
                min_inlier_fraction: self.ground_min_inlier_fraction,
                max_slope_deg: self.ground_max_slope_deg,
                max_rms_ratio: self.ground_max_rms_ratio,
            }),
            ransac: self.ransac.then_some(RansacParams {
                sample_size: self.ransac_sample_size,
                iterations: self.ransac_iterations,
                threshold: self.ransac_threshold,
                seed: self.seed,
            }),
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            icp: self.w_icp,
            shape: self.w_shape,
            motion_consistency: self.w_mc,
            motion_prior: self.w_mp,
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            max_outer_iterations: self.max_outer_iterations,
            outer_tolerance: self.outer_tolerance,
            max_inner_iterations: self.max_inner_iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::from_toml("gamma_inn = 1.5").unwrap_err();
        assert!(err.to_string().contains("gamma_inn"));
    }

    #[test]
    fn ablation_is_config_only() {
        let cfg = RunConfig::from_toml(
            "w_shape = 0.0\nw_mc = 0.0\nshape_mode = \"first\"\nransac = false",
        )
        .unwrap();
        assert_eq!(cfg.weights().shape, 0.0);
        assert_eq!(cfg.tracker().shape_mode, ShapeMode::First);
        assert!(cfg.tracker().ransac.is_none());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("alpha = 1.5").is_err());
        assert!(RunConfig::from_toml("w_icp = -1.0").is_err());
    }
}
