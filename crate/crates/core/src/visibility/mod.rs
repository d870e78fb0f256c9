//! Per-camera depth images and per-triangle occlusion flags.

mod raster;

use std::path::Path;

use image::{ImageBuffer, Luma};
use rayon::prelude::*;

use crate::calib::{CameraModel, CameraRig};
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

pub use raster::{rasterize, unproject_linear, Raster, NEAR_PLANE, NO_TRIANGLE};

/// Nearest camera-space depth per pixel; uncovered pixels hold `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub d: Vec<f64>,
}

impl DepthImage {
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.d[(y * self.width + x) as usize]
    }

    pub fn covered(&self) -> usize {
        self.d.iter().filter(|d| d.is_finite()).count()
    }

    /// 16-bit grayscale, nearest covered depth brightest, background black.
    pub fn to_image(&self) -> ImageBuffer<Luma<u16>, Vec<u16>> {
        let finite = self.d.iter().copied().filter(|d| d.is_finite());
        let lo = finite.clone().fold(f64::INFINITY, f64::min);
        let hi = finite.fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        ImageBuffer::from_fn(self.width, self.height, |x, y| {
            let d = self.get(x, y);
            if !d.is_finite() {
                Luma([0])
            } else if span <= 0.0 {
                Luma([u16::MAX])
            } else {
                Luma([(1.0 + (hi - d) / span * 65534.0).round() as u16])
            }
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_image().save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl From<Raster> for DepthImage {
    fn from(r: Raster) -> Self {
        Self {
            width: r.width,
            height: r.height,
            d: r.depth,
        }
    }
}

pub fn depth_image(mesh: &TriangleMesh, cam: &CameraModel) -> DepthImage {
    rasterize(mesh, cam).into()
}

/// `true` = visible. A triangle is occluded when its centroid lies more than
/// `t_v` behind the depth at the centroid's pixel, or projects outside the image.
pub fn classify_visibility(mesh: &TriangleMesh, cam: &CameraModel, depth: &DepthImage, t_v: f64) -> Vec<bool> {
    (0..mesh.triangle_count())
        .into_par_iter()
        .map(|t| {
            let pr = cam.project_linear(&mesh.centroid(t));
            if !pr.in_frustum {
                return false;
            }
            let (x, y) = pr.nearest_pixel();
            !(pr.depth - depth.get(x, y) > t_v)
        })
        .collect()
}

/// Visibility flags for every rig camera, in rig order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityMap {
    pub camera_ids: Vec<u32>,
    pub flags: Vec<Vec<bool>>,
}

impl VisibilityMap {
    pub fn for_camera(&self, id: u32) -> Option<&[bool]> {
        let k = self.camera_ids.iter().position(|&c| c == id)?;
        Some(&self.flags[k])
    }

    pub fn is_visible(&self, id: u32, triangle: usize) -> bool {
        self.for_camera(id).is_some_and(|f| f[triangle])
    }

    pub fn triangle_count(&self) -> usize {
        self.flags.first().map_or(0, Vec::len)
    }
}

/// Depth images and visibility for every camera of `rig`.
pub fn compute_visibility(mesh: &TriangleMesh, rig: &CameraRig, t_v: f64) -> (Vec<DepthImage>, VisibilityMap) {
    let depths: Vec<DepthImage> = rig.cameras().par_iter().map(|c| depth_image(mesh, c)).collect();
    let map = classify_all(mesh, rig, &depths, t_v);
    (depths, map)
}

pub fn classify_all(mesh: &TriangleMesh, rig: &CameraRig, depths: &[DepthImage], t_v: f64) -> VisibilityMap {
    VisibilityMap {
        camera_ids: rig.iter().map(|c| c.id).collect(),
        flags: rig
            .iter()
            .zip(depths)
            .map(|(c, d)| classify_visibility(mesh, c, d, t_v))
            .collect(),
    }
}
