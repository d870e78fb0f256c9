use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::carve::{carve_with_stats, CarveStats};
use super::ccl::{label_components, Labeling};
use super::grid::{GridSpec, VoxelGrid};
use crate::calib::CameraRig;
use crate::error::Result;
use crate::geom::Aabb;
use crate::silhouette::Mask;

/// Band-pass on component size: keep iff `t_small <= N(S) <= t_large`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseFilterParams {
    pub t_small: u64,
    pub t_large: u64,
}

impl NoiseFilterParams {
    pub fn new(t_small: u64, t_large: u64) -> Result<Self> {
        if t_small > t_large {
            return Err(crate::Error::InvalidParameter(format!(
                "noise filter needs t_small <= t_large (got {t_small} > {t_large})"
            )));
        }
        Ok(Self { t_small, t_large })
    }

    /// Keeps every component.
    pub fn disabled() -> Self {
        Self {
            t_small: 0,
            t_large: u64::MAX,
        }
    }

    pub fn keeps(&self, voxel_count: u64) -> bool {
        self.t_small <= voxel_count && voxel_count <= self.t_large
    }
}

/// Removes components outside the size band. Survivors keep their ids and voxels.
pub fn filter_noise(grid: &VoxelGrid, lab: &Labeling, params: &NoiseFilterParams) -> (VoxelGrid, Labeling) {
    let keep: Vec<bool> = std::iter::once(false)
        .chain(lab.components.iter().map(|c| params.keeps(c.voxel_count)))
        .collect();
    let mut out_grid = grid.clone();
    let mut labels = lab.labels.clone();
    for idx in grid.iter_on() {
        let l = labels[idx] as usize;
        if !keep[l] {
            labels[idx] = 0;
            out_grid.set(idx, false);
        }
    }
    let components = lab
        .components
        .iter()
        .filter(|c| keep[c.id as usize])
        .cloned()
        .collect();
    (
        out_grid,
        Labeling {
            dims: lab.dims,
            labels,
            components,
        },
    )
}

/// World-space box around one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roi {
    pub bounds: Aabb,
    pub component: u32,
}

/// One ROI per component: full voxel extents, grown by `margin`, clamped to the grid volume.
pub fn extract_rois(lab: &Labeling, spec: &GridSpec, margin: f64) -> Vec<Roi> {
    let stage = spec.bounds();
    let corner = spec.min_corner();
    lab.components
        .iter()
        .map(|c| {
            let lo = Vector3::new(c.bbox_min[0] as f64, c.bbox_min[1] as f64, c.bbox_min[2] as f64);
            let hi = Vector3::new(
                c.bbox_max[0] as f64 + 1.0,
                c.bbox_max[1] as f64 + 1.0,
                c.bbox_max[2] as f64 + 1.0,
            );
            let tight = Aabb::new(corner + lo * spec.spacing, corner + hi * spec.spacing);
            Roi {
                bounds: tight.expanded(margin).clamped_to(&stage),
                component: c.id,
            }
        })
        .collect()
}

/// Sub-grid of `lattice` covering `bounds` (snapped outward to lattice planes).
pub fn roi_grid_spec(lattice: &GridSpec, bounds: &Aabb, budget: u64) -> Result<GridSpec> {
    let corner = lattice.min_corner();
    let s = lattice.spacing;
    let lo = [0, 1, 2].map(|a| (((bounds.min[a] - corner[a]) / s + 1e-9).floor().max(0.0) as usize).min(lattice.dims[a] - 1));
    let hi = [0, 1, 2].map(|a| {
        (((bounds.max[a] - corner[a]) / s - 1e-9).ceil().max(0.0) as usize)
            .min(lattice.dims[a])
            .max(lo[a] + 1)
    });
    lattice.subgrid(lo, hi, budget)
}

/// Carves each ROI on the fine lattice.
///
/// ROI grids are cut from `lattice` (normally the whole stage at the fine
/// spacing, never allocated), so their voxels coincide with those of a
/// full-volume fine carve.
pub fn dense_carve(
    rig: &CameraRig,
    sils: &[Mask],
    rois: &[Roi],
    lattice: &GridSpec,
    min_views: usize,
    budget: u64,
) -> Result<Vec<VoxelGrid>> {
    dense_carve_with_stats(rig, sils, rois, lattice, min_views, budget).map(|(g, _)| g)
}

pub fn dense_carve_with_stats(
    rig: &CameraRig,
    sils: &[Mask],
    rois: &[Roi],
    lattice: &GridSpec,
    min_views: usize,
    budget: u64,
) -> Result<(Vec<VoxelGrid>, CarveStats)> {
    let mut total = CarveStats::default();
    let mut grids = Vec::with_capacity(rois.len());
    for roi in rois {
        let spec = roi_grid_spec(lattice, &roi.bounds, budget)?;
        let (g, stats) = carve_with_stats(rig, sils, &spec, min_views)?;
        total.tested += stats.tested;
        total.occupied += stats.occupied;
        grids.push(g);
    }
    Ok((grids, total))
}

/// Keeps the connected parts of an ROI carve that overlap coarse component
/// `component`, dropping pieces of neighbouring objects that reach into the ROI.
pub fn isolate_component(
    fine: &VoxelGrid,
    coarse: &Labeling,
    coarse_spec: &GridSpec,
    component: u32,
    block_dims: [usize; 3],
) -> VoxelGrid {
    let lab = label_components(fine, block_dims);
    let corner = coarse_spec.min_corner();
    let coarse_label = |p: Vector3<f64>| -> u32 {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - corner[a]) / coarse_spec.spacing).floor();
            if f < 0.0 || f >= coarse_spec.dims[a] as f64 {
                return 0;
            }
            c[a] = f as usize;
        }
        coarse.labels[coarse_spec.index(c[0], c[1], c[2])]
    };
    let mut keep = vec![false; lab.components.len() + 1];
    for idx in fine.iter_on() {
        let l = lab.labels[idx] as usize;
        if !keep[l] && coarse_label(fine.spec.center_of(idx)) == component {
            keep[l] = true;
        }
    }
    let mut out = fine.clone();
    for idx in fine.iter_on() {
        if !keep[lab.labels[idx] as usize] {
            out.set(idx, false);
        }
    }
    out
}
