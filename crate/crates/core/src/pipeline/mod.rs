//! End-to-end reconstruction of one frame, scene bundles, synthetic scenes
//! and timing sweeps.

mod bundle;
mod config;
mod sweep;
mod synth;

use std::time::Instant;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calib::CameraRig;
use crate::error::{Error, Result, Stage};
use crate::hull::{
    carve_with_stats, dense_carve_with_stats, extract_rois, filter_noise, isolate_component, label_components,
    GridSpec, Labeling, Roi, VoxelGrid,
};
use crate::mesh::{polygonize, TriangleMesh};
use crate::silhouette::{distance_map, extract_silhouette, BackgroundModel, Mask};
use crate::visibility::{classify_all, depth_image, DepthImage, VisibilityMap};

pub use bundle::{
    decode_visibility, encode_visibility, BundleObject, FrameStats, SceneBundle, BUNDLE_SCHEMA_VERSION,
    MANIFEST_FILE, RIG_FILE, TIMINGS_FILE, VISIBILITY_MAGIC,
};
pub use config::{Paths, PipelineConfig};
pub use sweep::{sweep, write_sweep_csv, SweepAxis, SweepRow};
pub use synth::{
    background_frames, cast, generate_synthetic_scene, render_analytic, render_clean, RigSpec, SceneObject, SceneSpec, Shape,
    SyntheticFrame,
};

/// Wall-clock milliseconds per stage, compute only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub silhouette_ms: f64,
    /// B-1
    pub sparse_carve_ms: f64,
    /// B-2
    pub noise_filter_roi_ms: f64,
    /// B-3
    pub dense_carve_ms: f64,
    /// C
    pub polygonize_ms: f64,
    /// D-1
    pub depth_ms: f64,
    /// D-2
    pub visibility_ms: f64,
}

impl StageTimings {
    pub const LABELS: [&'static str; 6] = ["B-1", "B-2", "B-3", "C", "D-1", "D-2"];

    /// Stage times in [`Self::LABELS`] order.
    pub fn stages(&self) -> [f64; 6] {
        [
            self.sparse_carve_ms,
            self.noise_filter_roi_ms,
            self.dense_carve_ms,
            self.polygonize_ms,
            self.depth_ms,
            self.visibility_ms,
        ]
    }

    /// Sum over B-1 to D-2.
    pub fn total_ms(&self) -> f64 {
        self.stages().iter().sum()
    }
}

/// Everything one frame produces; `bundle` is what gets written to disk.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub bundle: SceneBundle,
    pub silhouettes: Vec<Mask>,
    pub coarse: VoxelGrid,
    /// Coarse labels after noise filtering.
    pub labeling: Labeling,
    pub rois: Vec<Roi>,
    /// Raw ROI carves, one per ROI.
    pub dense: Vec<VoxelGrid>,
    pub depths: Vec<DepthImage>,
    pub timings: StageTimings,
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    *slot = t0.elapsed().as_secs_f64() * 1e3;
    out
}

/// Silhouettes from frames, background models and foreground proposals.
pub fn extract_silhouettes(
    cfg: &PipelineConfig,
    rig: &CameraRig,
    frames: &[RgbImage],
    proposals: &[Mask],
    backgrounds: &[BackgroundModel],
) -> Result<Vec<Mask>> {
    let n = rig.len();
    if frames.len() != n || proposals.len() != n || backgrounds.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} cameras but {} frames, {} proposals, {} background models",
            n,
            frames.len(),
            proposals.len(),
            backgrounds.len()
        )));
    }
    rig.iter()
        .zip(frames.iter().zip(proposals).zip(backgrounds))
        .map(|(cam, ((frame, proposal), bg))| {
            if proposal.dims() != (cam.width, cam.height) {
                return Err(Error::DimensionMismatch(format!(
                    "camera {}: proposal is {}x{}",
                    cam.id,
                    proposal.width(),
                    proposal.height()
                )));
            }
            extract_silhouette(frame, bg, &distance_map(proposal), &cfg.silhouette)
        })
        .collect()
}

/// Full pipeline: silhouettes, then [`reconstruct`].
pub fn run_frame(
    cfg: &PipelineConfig,
    rig: &CameraRig,
    frame_id: u64,
    frames: &[RgbImage],
    proposals: &[Mask],
    backgrounds: &[BackgroundModel],
) -> Result<FrameOutput> {
    cfg.validate()?;
    let mut silhouette_ms = 0.0;
    let sils = timed(&mut silhouette_ms, || extract_silhouettes(cfg, rig, frames, proposals, backgrounds))
        .map_err(|e| e.in_stage(Stage::Silhouette))?;
    let mut out = reconstruct(cfg, rig, frame_id, frames, sils)?;
    out.timings.silhouette_ms = silhouette_ms;
    out.bundle.timings = Some(out.timings);
    Ok(out)
}

/// Carving through visibility from ready-made silhouettes.
pub fn reconstruct(
    cfg: &PipelineConfig,
    rig: &CameraRig,
    frame_id: u64,
    frames: &[RgbImage],
    sils: Vec<Mask>,
) -> Result<FrameOutput> {
    cfg.validate()?;
    let mut t = StageTimings::default();
    let mut stats = FrameStats::default();

    // B-1
    let coarse_spec = GridSpec::covering(&cfg.stage, cfg.coarse_spacing, cfg.voxel_budget)
        .map_err(|e| e.in_stage(Stage::SparseCarve))?;
    let (coarse, cs) = timed(&mut t.sparse_carve_ms, || carve_with_stats(rig, &sils, &coarse_spec, cfg.min_views))
        .map_err(|e| e.in_stage(Stage::SparseCarve))?;
    stats.coarse_voxels_tested = cs.tested;
    stats.coarse_voxels_occupied = cs.occupied;

    // B-2
    let filter = cfg.noise_filter().map_err(|e| e.in_stage(Stage::NoiseFilter))?;
    let (labeling, rois, found) = timed(&mut t.noise_filter_roi_ms, || {
        let lab = label_components(&coarse, cfg.ccl_block);
        let found = lab.components.len();
        let (_, lab) = filter_noise(&coarse, &lab, &filter);
        let rois = extract_rois(&lab, &coarse_spec, cfg.roi_margin);
        (lab, rois, found)
    });
    stats.components_found = found as u64;
    stats.components_kept = labeling.components.len() as u64;

    // B-3
    let lattice =
        GridSpec::covering(&cfg.stage, cfg.fine_spacing, u64::MAX).map_err(|e| e.in_stage(Stage::DenseCarve))?;
    let (dense, isolated) = timed(&mut t.dense_carve_ms, || -> Result<_> {
        let (dense, ds) = dense_carve_with_stats(rig, &sils, &rois, &lattice, cfg.min_views, cfg.voxel_budget)?;
        stats.fine_voxels_tested = ds.tested;
        stats.fine_voxels_occupied = ds.occupied;
        let isolated: Vec<VoxelGrid> = dense
            .iter()
            .zip(&rois)
            .map(|(g, roi)| isolate_component(g, &labeling, &coarse_spec, roi.component, cfg.ccl_block))
            .collect();
        Ok((dense, isolated))
    })
    .map_err(|e| e.in_stage(Stage::DenseCarve))?;

    // C
    let objects = timed(&mut t.polygonize_ms, || -> Result<Vec<BundleObject>> {
        let mut objects = Vec::with_capacity(rois.len());
        for (grid, roi) in isolated.iter().zip(&rois) {
            let (mesh, ps) = polygonize(grid, rig, &sils, cfg.iso_mode, roi.component)?;
            stats.fallback_edges += ps.fallback_edges;
            stats.inconsistent_edges += ps.inconsistent_edges;
            objects.push(BundleObject {
                id: roi.component,
                mesh,
                voxel_count: grid.count_on() as u64,
                bounds: grid.spec.bounds(),
            });
        }
        Ok(objects)
    })
    .map_err(|e| e.in_stage(Stage::Polygonize))?;
    let scene: TriangleMesh = TriangleMesh::merge(objects.iter().map(|o| &o.mesh));
    stats.vertices = scene.vertices.len() as u64;
    stats.triangles = scene.triangle_count() as u64;

    // D-1, D-2
    let depths: Vec<DepthImage> = timed(&mut t.depth_ms, || {
        rig.cameras().par_iter().map(|c| depth_image(&scene, c)).collect()
    });
    let visibility: VisibilityMap = timed(&mut t.visibility_ms, || classify_all(&scene, rig, &depths, cfg.t_v));

    let bundle = SceneBundle {
        frame_id,
        rig: rig.clone(),
        objects,
        textures: frames.to_vec(),
        visibility,
        stats,
        timings: Some(t),
    };
    bundle.validate().map_err(|e| e.in_stage(Stage::Bundle))?;
    Ok(FrameOutput {
        bundle,
        silhouettes: sils,
        coarse,
        labeling,
        rois,
        dense,
        depths,
        timings: t,
    })
}
