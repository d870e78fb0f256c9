//! Command-line overrides for every field of [`PipelineConfig`].

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use clap::Args;
use fvv_core::{IsoMode, PipelineConfig};
use nalgebra::Vector3;

/// Three comma-separated numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triple<T>(pub [T; 3]);

impl<T: FromStr + Copy + Default> FromStr for Triple<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("expected three comma-separated values, got {s:?}"));
        }
        let mut out = [T::default(); 3];
        for (o, p) in out.iter_mut().zip(parts) {
            *o = p.parse().map_err(|e| format!("{p:?}: {e}"))?;
        }
        Ok(Triple(out))
    }
}

impl Triple<f64> {
    pub fn vector(self) -> Vector3<f64> {
        Vector3::from(self.0)
    }
}

pub fn parse_iso_mode(s: &str) -> Result<IsoMode, String> {
    match s {
        "exact" => Ok(IsoMode::Exact),
        _ => match s.strip_prefix("fixed:").or(if s == "fixed" { Some("0.5") } else { None }) {
            Some(v) => v.parse().map(IsoMode::Fixed).map_err(|e| format!("{v:?}: {e}")),
            None => Err(format!("expected `exact`, `fixed` or `fixed:<lambda>`, got {s:?}")),
        },
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML config file; flags below override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Stage volume minimum corner, mm (x,y,z).
    #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
    pub stage_min: Option<Triple<f64>>,
    /// Stage volume maximum corner, mm (x,y,z).
    #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
    pub stage_max: Option<Triple<f64>>,
    /// Coarse voxel size, mm. Also resets the ROI margin unless given.
    #[arg(long, value_name = "MM")]
    pub coarse: Option<f64>,
    /// Fine voxel size, mm.
    #[arg(long, value_name = "MM")]
    pub fine: Option<f64>,
    #[arg(long)]
    pub min_views: Option<usize>,
    /// Smallest kept component, in coarse voxels.
    #[arg(long)]
    pub t_small: Option<u64>,
    /// Largest kept component, in coarse voxels.
    #[arg(long)]
    pub t_large: Option<u64>,
    #[arg(long, value_name = "MM")]
    pub roi_margin: Option<f64>,
    /// Occlusion depth threshold, mm.
    #[arg(long, value_name = "MM")]
    pub t_v: Option<f64>,
    /// `exact` or `fixed:<lambda>`.
    #[arg(long, value_parser = parse_iso_mode)]
    pub iso: Option<IsoMode>,
    #[arg(long)]
    pub theta_near: Option<f64>,
    #[arg(long)]
    pub theta_far: Option<f64>,
    /// Proposal distance at which the threshold reaches `theta_far`, px.
    #[arg(long)]
    pub d_max: Option<f64>,
    #[arg(long)]
    pub voxel_budget: Option<u64>,
    /// Labeling block shape in voxels.
    #[arg(long, value_name = "X,Y,Z")]
    pub ccl_block: Option<Triple<usize>>,
}

impl ConfigArgs {
    /// Starts from `base` (or the config file) and applies every given flag.
    pub fn resolve(&self, base: PipelineConfig) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
            None => base,
        };
        if let Some(v) = self.stage_min {
            cfg.stage.min = v.vector();
        }
        if let Some(v) = self.stage_max {
            cfg.stage.max = v.vector();
        }
        if let Some(c) = self.coarse {
            cfg.coarse_spacing = c;
            cfg.roi_margin = c;
        }
        if let Some(f) = self.fine {
            cfg.fine_spacing = f;
        }
        if let Some(v) = self.min_views {
            cfg.min_views = v;
        }
        if let Some(v) = self.t_small {
            cfg.t_small = v;
        }
        if self.t_large.is_some() {
            cfg.t_large = self.t_large;
        }
        if let Some(v) = self.roi_margin {
            cfg.roi_margin = v;
        }
        if let Some(v) = self.t_v {
            cfg.t_v = v;
        }
        if let Some(v) = self.iso {
            cfg.iso_mode = v;
        }
        if let Some(v) = self.theta_near {
            cfg.silhouette.theta_near = v;
        }
        if let Some(v) = self.theta_far {
            cfg.silhouette.theta_far = v;
        }
        if let Some(v) = self.d_max {
            cfg.silhouette.d_max = v;
        }
        if let Some(v) = self.voxel_budget {
            cfg.voxel_budget = v;
        }
        if let Some(v) = self.ccl_block {
            cfg.ccl_block = v.0;
        }
        cfg.validate().map_err(|e| anyhow!("invalid configuration: {e}"))?;
        Ok(cfg)
    }
}
