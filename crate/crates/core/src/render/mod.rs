//! View-dependent rendering from the nearest reference camera that sees each
//! surface point.

use image::{Rgb, RgbImage};
use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calib::{CameraModel, CameraRig};
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::visibility::{rasterize, unproject_linear, VisibilityMap, NO_TRIANGLE};

pub const FALLBACK_COLOR: [u8; 3] = [128, 128, 128];

/// A distortion-free camera placed at an arbitrary pose.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualCamera {
    model: CameraModel,
}

impl VirtualCamera {
    /// Takes the geometry of `cam`, dropping its lens distortion.
    pub fn from_camera(cam: &CameraModel) -> Result<Self> {
        let mut model = cam.clone();
        model.dist = [0.0; 5];
        model.validate()?;
        Ok(Self { model })
    }

    pub fn look_at(width: u32, height: u32, focal: f64, eye: Vector3<f64>, target: Vector3<f64>) -> Result<Self> {
        Self::from_camera(&CameraModel::look_at(u32::MAX, width, height, focal, eye, target))
    }

    pub fn from_orbit(orbit: &OrbitPose, width: u32, height: u32, focal: f64) -> Result<Self> {
        Self::look_at(width, height, focal, orbit.eye(), orbit.target)
    }

    pub fn model(&self) -> &CameraModel {
        &self.model
    }

    pub fn center(&self) -> Vector3<f64> {
        self.model.center()
    }
}

/// Orbit pose: eye at `radius` from `target`, azimuth in the xy-plane from +x
/// and elevation above it, both in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitPose {
    pub target: Vector3<f64>,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub radius: f64,
}

impl OrbitPose {
    pub fn eye(&self) -> Vector3<f64> {
        let (az, el) = (self.azimuth_deg.to_radians(), self.elevation_deg.to_radians());
        self.target + Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * self.radius
    }
}

/// Camera ids by ascending distance between optical centres, ties to lower id.
pub fn rank_cameras(v: &VirtualCamera, rig: &CameraRig) -> Vec<u32> {
    rank_from_point(&v.center(), rig)
}

pub fn rank_from_point(p: &Vector3<f64>, rig: &CameraRig) -> Vec<u32> {
    let mut d: Vec<(f64, u32)> = rig.iter().map(|c| ((c.center() - p).norm(), c.id)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().map(|(_, id)| id).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub color: RgbImage,
    /// Source camera per pixel; `None` for background and fallback pixels.
    pub source: Vec<Option<u32>>,
    /// Front triangle per pixel, [`NO_TRIANGLE`] where uncovered.
    pub triangle: Vec<u32>,
    pub fallback_pixels: usize,
}

impl RenderedImage {
    pub fn width(&self) -> u32 {
        self.color.width()
    }

    pub fn height(&self) -> u32 {
        self.color.height()
    }

    pub fn source_at(&self, x: u32, y: u32) -> Option<u32> {
        self.source[(y * self.width() + x) as usize]
    }

    /// False-colour map of source cameras; black where there is none.
    pub fn source_map_image(&self) -> RgbImage {
        RgbImage::from_fn(self.width(), self.height(), |x, y| match self.source_at(x, y) {
            None => Rgb([0, 0, 0]),
            Some(id) => {
                let h = (id as f64 * 0.618_033_988_75).fract();
                hue_to_rgb(h)
            }
        })
    }
}

fn hue_to_rgb(h: f64) -> Rgb<u8> {
    let f = |n: f64| {
        let k = (n + h * 6.0) % 6.0;
        let v = 1.0 - (k.min(4.0 - k).clamp(0.0, 1.0));
        (v * 255.0).round() as u8
    };
    Rgb([f(5.0), f(3.0), f(1.0)])
}

/// Bilinear sample with pixel centres at integer coordinates, clamped at the border.
pub fn sample_bilinear(img: &RgbImage, p: &Vector2<f64>) -> [f64; 3] {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (x0, y0) = (p.x.floor(), p.y.floor());
    let (fx, fy) = (p.x - x0, p.y - y0);
    let px = |x: i64, y: i64| img.get_pixel(x.clamp(0, w - 1) as u32, y.clamp(0, h - 1) as u32).0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let [a, b, c, d] = [px(x0, y0), px(x0 + 1, y0), px(x0, y0 + 1), px(x0 + 1, y0 + 1)];
    std::array::from_fn(|k| {
        let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
        let bottom = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// Renders `mesh` from `v`. Each covered pixel takes its colour from the
/// first ranked camera in which the pixel's front triangle is visible,
/// sampled at the surface point's distorted projection.
pub fn render_view(
    mesh: &TriangleMesh,
    rig: &CameraRig,
    frames: &[RgbImage],
    vis: &VisibilityMap,
    v: &VirtualCamera,
    fallback: [u8; 3],
) -> Result<RenderedImage> {
    if frames.len() != rig.len() {
        return Err(Error::DimensionMismatch(format!("{} frames for {} cameras", frames.len(), rig.len())));
    }
    for (c, f) in rig.iter().zip(frames) {
        if f.dimensions() != (c.width, c.height) {
            return Err(Error::DimensionMismatch(format!(
                "camera {}: frame is {:?}, expected {}x{}",
                c.id,
                f.dimensions(),
                c.width,
                c.height
            )));
        }
        if vis.for_camera(c.id).map(|f| f.len()) != Some(mesh.triangle_count()) {
            return Err(Error::DimensionMismatch(format!(
                "camera {}: visibility does not match the mesh",
                c.id
            )));
        }
    }
    let order: Vec<usize> = rank_cameras(v, rig).iter().map(|&id| rig.position_of(id).unwrap()).collect();
    let flags: Vec<&[bool]> = order.iter().map(|&k| vis.for_camera(rig.get(k).id).unwrap()).collect();
    let cam = v.model();
    let raster = rasterize(mesh, cam);
    let w = cam.width as usize;

    let pixels: Vec<([u8; 3], Option<u32>)> = (0..raster.depth.len())
        .into_par_iter()
        .map(|i| {
            let t = raster.triangle[i];
            if t == NO_TRIANGLE {
                return ([0, 0, 0], None);
            }
            let Some(r) = flags.iter().position(|f| f[t as usize]) else {
                return (fallback, None);
            };
            let src = rig.get(order[r]);
            let p = unproject_linear(cam, (i % w) as f64, (i / w) as f64, raster.depth[i]);
            let c = sample_bilinear(&frames[order[r]], &src.project(&p).pixel);
            (c.map(|x| x.round().clamp(0.0, 255.0) as u8), Some(src.id))
        })
        .collect();

    let mut color = RgbImage::new(cam.width, cam.height);
    for (px, (c, _)) in color.pixels_mut().zip(&pixels) {
        *px = Rgb(*c);
    }
    let fallback_pixels = pixels
        .iter()
        .zip(&raster.triangle)
        .filter(|((_, s), &t)| s.is_none() && t != NO_TRIANGLE)
        .count();
    Ok(RenderedImage {
        color,
        source: pixels.into_iter().map(|p| p.1).collect(),
        triangle: raster.triangle,
        fallback_pixels,
    })
}
