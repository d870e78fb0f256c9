use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Aabb;
use crate::hull::{NoiseFilterParams, DEFAULT_VOXEL_BUDGET};
use crate::mesh::IsoMode;
use crate::silhouette::AdaptiveParams;

/// Every tunable of a reconstruction run. Lengths are millimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub stage: Aabb,
    pub coarse_spacing: f64,
    pub fine_spacing: f64,
    /// Cameras that must see a voxel centre for it to be kept.
    pub min_views: usize,
    /// Noise filter band, in coarse voxels. Unset `t_large` means unbounded.
    pub t_small: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_large: Option<u64>,
    pub roi_margin: f64,
    /// Occlusion threshold.
    pub t_v: f64,
    pub iso_mode: IsoMode,
    pub silhouette: AdaptiveParams,
    pub voxel_budget: u64,
    pub ccl_block: [usize; 3],
    #[serde(default)]
    pub paths: Paths,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stage: Aabb::new(Vector3::new(-3500.0, -3500.0, 0.0), Vector3::new(3500.0, 3500.0, 2500.0)),
            coarse_spacing: 50.0,
            fine_spacing: 20.0,
            min_views: 3,
            t_small: 4,
            t_large: None,
            roi_margin: 50.0,
            t_v: 60.0,
            iso_mode: IsoMode::Exact,
            silhouette: AdaptiveParams::default(),
            voxel_budget: DEFAULT_VOXEL_BUDGET,
            ccl_block: [32, 32, 32],
            paths: Paths::default(),
        }
    }
}

impl PipelineConfig {
    /// Sets both spacings, keeping the margin at one coarse voxel and the
    /// occlusion threshold at three fine voxels.
    pub fn with_spacings(mut self, coarse: f64, fine: f64) -> Self {
        self.coarse_spacing = coarse;
        self.fine_spacing = fine;
        self.roi_margin = coarse;
        self.t_v = 3.0 * fine;
        self
    }

    pub fn noise_filter(&self) -> Result<NoiseFilterParams> {
        NoiseFilterParams::new(self.t_small, self.t_large.unwrap_or(u64::MAX))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        let s = &self.stage;
        if !(s.is_valid() && (0..3).all(|a| s.max[a] > s.min[a])) {
            return bad(format!("stage volume is empty: {:?}..{:?}", s.min, s.max));
        }
        if !(self.fine_spacing > 0.0 && self.fine_spacing.is_finite()) {
            return bad(format!("fine spacing {} must be positive", self.fine_spacing));
        }
        if !(self.coarse_spacing >= self.fine_spacing && self.coarse_spacing.is_finite()) {
            return bad(format!(
                "coarse spacing {} must be >= fine spacing {}",
                self.coarse_spacing, self.fine_spacing
            ));
        }
        if self.min_views == 0 {
            return bad("min_views must be at least 1".into());
        }
        if !(self.roi_margin >= 0.0) || !(self.t_v >= 0.0) {
            return bad("roi_margin and t_v must be nonnegative".into());
        }
        if let IsoMode::Fixed(l) = self.iso_mode {
            if !(0.0..=1.0).contains(&l) {
                return bad(format!("fixed isovalue {l} outside [0, 1]"));
            }
        }
        if self.ccl_block.contains(&0) {
            return bad("ccl_block entries must be positive".into());
        }
        self.silhouette.validate()?;
        self.noise_filter()?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            what: "pipeline config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}
