//! Camera models, projection and calibration manifests.
//!
//! World space is right-handed, z-up, in millimetres. Camera space follows the
//! usual vision convention: x right, y down, z along the optical axis. Pixel
//! `(i, j)` has its centre at coordinates `(i, j)`, so a projected point lands
//! on pixel `(round(u), round(v))` and is inside the image when
//! `-0.5 <= u < width - 0.5` (likewise for `v`).
//!
//! Lens distortion uses the five-coefficient radial/tangential model
//! `(k1, k2, p1, p2, k3)` with skew applied after distortion:
//!
//! ```text
//! x = X/Z, y = Y/Z, r² = x² + y²
//! radial = 1 + k1 r² + k2 r⁴ + k3 r⁶
//! xd = x·radial + 2 p1 x y + p2 (r² + 2x²)
//! yd = y·radial + p1 (r² + 2y²) + 2 p2 x y
//! u  = fx (xd + skew·yd) + cx,  v = fy yd + cy
//! ```

use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `RᵀR = I` and `det R = 1` accepted on load.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Version written to and expected in calibration manifests.
pub const RIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub id: u32,
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub skew: f64,
    /// `(k1, k2, p1, p2, k3)`.
    pub dist: [f64; 5],
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    /// World-to-camera translation (mm).
    pub translation: Vector3<f64>,
}

/// Result of projecting a world point into a camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: Vector2<f64>,
    /// Camera-space z (mm).
    pub depth: f64,
    pub in_frustum: bool,
}

impl Projection {
    /// Nearest pixel, valid only when `in_frustum`.
    pub fn nearest_pixel(&self) -> (u32, u32) {
        (
            (self.pixel.x + 0.5).floor() as u32,
            (self.pixel.y + 0.5).floor() as u32,
        )
    }
}

impl CameraModel {
    /// Camera at `eye` looking at `target`, zero distortion, principal point at the image centre.
    pub fn look_at(
        id: u32,
        width: u32,
        height: u32,
        focal: f64,
        eye: Vector3<f64>,
        target: Vector3<f64>,
    ) -> Self {
        let forward = (target - eye).normalize();
        let mut up = Vector3::z();
        if forward.cross(&up).norm() < 1e-9 {
            up = Vector3::y();
        }
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        Self {
            id,
            width,
            height,
            fx: focal,
            fy: focal,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            skew: 0.0,
            dist: [0.0; 5],
            translation: -(rotation * eye),
            rotation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidCamera { id: self.id, reason });
        if self.width == 0 || self.height == 0 {
            return bad(format!("image size {}x{} must be positive", self.width, self.height));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad(format!("focal lengths must be positive (fx={}, fy={})", self.fx, self.fy));
        }
        let scalars = [self.cx, self.cy, self.skew];
        if scalars.iter().chain(self.dist.iter()).any(|v| !v.is_finite()) {
            return bad("non-finite intrinsic or distortion value".into());
        }
        let r = &self.rotation;
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        if !(ortho <= ROTATION_TOLERANCE) {
            return bad(format!("rotation is not orthonormal (max |RᵀR - I| = {ortho:e})"));
        }
        let det = r.determinant();
        if !((det - 1.0).abs() <= ROTATION_TOLERANCE) {
            return bad(format!("rotation determinant is {det}, expected +1"));
        }
        if !self.center().iter().all(|v| v.is_finite()) {
            return bad("camera centre is not finite".into());
        }
        Ok(())
    }

    /// Optical centre in world coordinates, `-Rᵀt`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn to_world(&self, pc: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (pc - self.translation)
    }

    pub fn has_distortion(&self) -> bool {
        self.dist.iter().any(|&k| k != 0.0)
    }

    /// Applies radial/tangential distortion to normalized coordinates.
    pub fn distort(&self, x: f64, y: f64) -> (f64, f64) {
        let [k1, k2, p1, p2, k3] = self.dist;
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
        let xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
        let yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
        (xd, yd)
    }

    /// Inverts [`Self::distort`] by fixed-point iteration.
    pub fn undistort(&self, xd: f64, yd: f64) -> (f64, f64) {
        if !self.has_distortion() {
            return (xd, yd);
        }
        let [k1, k2, p1, p2, k3] = self.dist;
        let (mut x, mut y) = (xd, yd);
        for _ in 0..50 {
            let r2 = x * x + y * y;
            let radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
            let dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
            let dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
            let (nx, ny) = ((xd - dx) / radial, (yd - dy) / radial);
            let step = (nx - x).abs() + (ny - y).abs();
            x = nx;
            y = ny;
            if step < 1e-15 {
                break;
            }
        }
        (x, y)
    }

    /// Maps distorted normalized coordinates to pixels.
    #[inline]
    pub fn apply_intrinsics(&self, xd: f64, yd: f64) -> Vector2<f64> {
        Vector2::new(self.fx * (xd + self.skew * yd) + self.cx, self.fy * yd + self.cy)
    }

    /// Inverse of [`Self::apply_intrinsics`].
    pub fn remove_intrinsics(&self, pixel: &Vector2<f64>) -> (f64, f64) {
        let yd = (pixel.y - self.cy) / self.fy;
        let xd = (pixel.x - self.cx) / self.fx - self.skew * yd;
        (xd, yd)
    }

    /// True when `pixel` rounds to a pixel inside the image.
    #[inline]
    pub fn contains_pixel(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= -0.5
            && pixel.y >= -0.5
            && pixel.x < self.width as f64 - 0.5
            && pixel.y < self.height as f64 - 0.5
    }

    /// Full projection: pinhole, distortion, intrinsics.
    pub fn project(&self, p: &Vector3<f64>) -> Projection {
        self.project_camera_point(&self.to_camera(p), true)
    }

    /// Pinhole projection ignoring lens distortion.
    pub fn project_linear(&self, p: &Vector3<f64>) -> Projection {
        self.project_camera_point(&self.to_camera(p), false)
    }

    #[inline]
    pub fn project_camera_point(&self, pc: &Vector3<f64>, distort: bool) -> Projection {
        let depth = pc.z;
        let (x, y) = (pc.x / depth, pc.y / depth);
        let (xd, yd) = if distort { self.distort(x, y) } else { (x, y) };
        let pixel = self.apply_intrinsics(xd, yd);
        Projection {
            pixel,
            depth,
            in_frustum: depth > 0.0 && self.contains_pixel(&pixel),
        }
    }

    /// World-space unit direction of the ray through `pixel` (distortion removed).
    pub fn pixel_ray(&self, pixel: &Vector2<f64>) -> Vector3<f64> {
        let (xd, yd) = self.remove_intrinsics(pixel);
        let (x, y) = self.undistort(xd, yd);
        (self.rotation.transpose() * Vector3::new(x, y, 1.0)).normalize()
    }

    /// World point seen at `pixel` with camera-space depth `depth`.
    pub fn backproject(&self, pixel: &Vector2<f64>, depth: f64) -> Vector3<f64> {
        let (xd, yd) = self.remove_intrinsics(pixel);
        let (x, y) = self.undistort(xd, yd);
        self.to_world(&Vector3::new(x * depth, y * depth, depth))
    }
}

/// Ordered set of calibrated cameras.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    cameras: Vec<CameraModel>,
}

impl CameraRig {
    pub fn new(cameras: Vec<CameraModel>) -> Result<Self> {
        if cameras.is_empty() {
            return Err(Error::EmptyRig);
        }
        let mut ids = std::collections::BTreeSet::new();
        for cam in &cameras {
            cam.validate()?;
            if !ids.insert(cam.id) {
                return Err(Error::DuplicateCameraId(cam.id));
            }
        }
        Ok(Self { cameras })
    }

    pub fn cameras(&self) -> &[CameraModel] {
        &self.cameras
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn get(&self, index: usize) -> &CameraModel {
        &self.cameras[index]
    }

    pub fn position_of(&self, id: u32) -> Option<usize> {
        self.cameras.iter().position(|c| c.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CameraModel> {
        self.cameras.iter()
    }

    pub fn to_manifest_string(&self) -> String {
        let manifest = RigManifest {
            schema_version: RIG_SCHEMA_VERSION,
            cameras: self.cameras.iter().map(CameraEntry::from).collect(),
        };
        toml::to_string(&manifest).expect("rig manifest serializes")
    }

    pub fn from_manifest_str(text: &str) -> Result<Self> {
        let manifest: RigManifest = toml::from_str(text).map_err(|e| Error::Parse {
            what: "calibration manifest".into(),
            message: e.to_string(),
        })?;
        if manifest.schema_version != RIG_SCHEMA_VERSION {
            return Err(Error::Parse {
                what: "calibration manifest".into(),
                message: format!(
                    "unsupported schema_version {} (expected {RIG_SCHEMA_VERSION})",
                    manifest.schema_version
                ),
            });
        }
        let cameras = manifest.cameras.into_iter().map(CameraModel::from).collect();
        Self::new(cameras)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_manifest_string()).map_err(|e| Error::io(path, e))
    }
}

/// Reads and validates a calibration manifest.
pub fn load_rig(path: &Path) -> Result<CameraRig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CameraRig::from_manifest_str(&text)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RigManifest {
    schema_version: u32,
    #[serde(rename = "camera", default)]
    cameras: Vec<CameraEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraEntry {
    id: u32,
    image_size: [u32; 2],
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    #[serde(default)]
    skew: f64,
    dist: [f64; 5],
    /// Row-major 3×3.
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl From<&CameraModel> for CameraEntry {
    fn from(c: &CameraModel) -> Self {
        let r = &c.rotation;
        Self {
            id: c.id,
            image_size: [c.width, c.height],
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            skew: c.skew,
            dist: c.dist,
            rotation: [
                r[(0, 0)], r[(0, 1)], r[(0, 2)],
                r[(1, 0)], r[(1, 1)], r[(1, 2)],
                r[(2, 0)], r[(2, 1)], r[(2, 2)],
            ],
            translation: [c.translation.x, c.translation.y, c.translation.z],
        }
    }
}

impl From<CameraEntry> for CameraModel {
    fn from(e: CameraEntry) -> Self {
        Self {
            id: e.id,
            width: e.image_size[0],
            height: e.image_size[1],
            fx: e.fx,
            fy: e.fy,
            cx: e.cx,
            cy: e.cy,
            skew: e.skew,
            dist: e.dist,
            rotation: Matrix3::from_row_slice(&e.rotation),
            translation: Vector3::from_row_slice(&e.translation),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_cam() -> CameraModel {
        CameraModel {
            id: 0,
            width: 1920,
            height: 1080,
            fx: 1000.0,
            fy: 1000.0,
            cx: 960.0,
            cy: 540.0,
            skew: 0.0,
            dist: [0.0; 5],
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let p = identity_cam().project(&Vector3::new(0.0, 0.0, 5000.0));
        assert_eq!(p.pixel, Vector2::new(960.0, 540.0));
        assert_eq!(p.depth, 5000.0);
        assert!(p.in_frustum);
    }

    #[test]
    fn lateral_offset_scales_by_focal() {
        let p = identity_cam().project(&Vector3::new(500.0, 0.0, 5000.0));
        assert!((p.pixel - Vector2::new(1060.0, 540.0)).norm() < 1e-12);
    }

    #[test]
    fn radial_distortion_matches_direct_formula() {
        let mut cam = identity_cam();
        cam.dist[0] = 0.1;
        let p = cam.project(&Vector3::new(500.0, 0.0, 5000.0));
        // Written out independently: x = 0.1, r² = 0.01, xd = 0.1 · (1 + 0.1 · 0.01).
        let expected_u = 1000.0 * (0.1 * (1.0 + 0.1 * 0.01)) + 960.0;
        assert!((p.pixel.x - expected_u).abs() < 1e-9, "{} vs {expected_u}", p.pixel.x);
        assert!((p.pixel.y - 540.0).abs() < 1e-9);
    }

    #[test]
    fn full_distortion_chain_matches_scratch_oracle() {
        let mut cam = identity_cam();
        cam.dist = [0.12, -0.03, 0.001, -0.002, 0.004];
        cam.skew = 0.002;
        let p = Vector3::new(700.0, -350.0, 4200.0);
        let (x, y) = (p.x / p.z, p.y / p.z);
        let r2 = x * x + y * y;
        let radial = 1.0 + 0.12 * r2 - 0.03 * r2 * r2 + 0.004 * r2 * r2 * r2;
        let xd = x * radial + 2.0 * 0.001 * x * y + (-0.002) * (r2 + 2.0 * x * x);
        let yd = y * radial + 0.001 * (r2 + 2.0 * y * y) + 2.0 * (-0.002) * x * y;
        let u = 1000.0 * (xd + 0.002 * yd) + 960.0;
        let v = 1000.0 * yd + 540.0;
        let got = cam.project(&p).pixel;
        assert!((got.x - u).abs() < 1e-9 && (got.y - v).abs() < 1e-9);
    }

    #[test]
    fn behind_camera_is_out_of_frustum() {
        let p = identity_cam().project(&Vector3::new(0.0, 0.0, -5000.0));
        assert!(!p.in_frustum);
        let p = identity_cam().project(&Vector3::new(0.0, 0.0, 0.0));
        assert!(!p.in_frustum);
    }

    #[test]
    fn image_bounds_use_pixel_centres() {
        let cam = identity_cam();
        let at = |u: f64, v: f64| cam.contains_pixel(&Vector2::new(u, v));
        assert!(at(-0.5, -0.5));
        assert!(!at(-0.51, 0.0));
        assert!(at(1919.49, 1079.49));
        assert!(!at(1919.5, 0.0));
    }

    #[test]
    fn identity_rig_has_origin_centre() {
        let rig = CameraRig::new(vec![identity_cam()]).unwrap();
        assert_eq!(rig.len(), 1);
        assert_eq!(rig.get(0).center(), Vector3::zeros());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = CameraRig::new(vec![identity_cam(), identity_cam()]).unwrap_err();
        assert!(matches!(err, Error::DuplicateCameraId(0)));
    }

    #[test]
    fn bad_rotation_and_focal_rejected_with_id() {
        let mut cam = identity_cam();
        cam.id = 7;
        cam.rotation[(0, 0)] = 1.01;
        let msg = cam.validate().unwrap_err().to_string();
        assert!(msg.contains("camera 7"), "{msg}");

        let mut cam = identity_cam();
        cam.id = 3;
        cam.fy = 0.0;
        assert!(cam.validate().unwrap_err().to_string().contains("camera 3"));

        let mut cam = identity_cam();
        cam.rotation = -Matrix3::identity();
        assert!(cam.validate().is_err(), "det = -1 must be rejected");
    }

    #[test]
    fn manifest_round_trip() {
        let eye = Vector3::new(4000.0, -3000.0, 1500.0);
        let mut a = CameraModel::look_at(2, 640, 360, 500.0, eye, Vector3::zeros());
        a.dist = [0.01, -0.002, 0.0005, 0.0, 0.0001];
        let rig = CameraRig::new(vec![identity_cam(), a]).unwrap();
        let text = rig.to_manifest_string();
        let back = CameraRig::from_manifest_str(&text).unwrap();
        assert_eq!(rig, back);
    }

    #[test]
    fn manifest_errors_are_reported() {
        assert!(CameraRig::from_manifest_str("schema_version = 1\n").is_err());
        assert!(CameraRig::from_manifest_str("not toml [").is_err());
        let dup = "schema_version = 1\n[[camera]]\nid = 1\nimage_size = [10, 10]\nfx = 1.0\nfy = 1.0\ncx = 5.0\ncy = 5.0\ndist = [0,0,0,0,0]\nrotation = [1,0,0,0,1,0,0,0,1]\ntranslation = [0,0,0]\n";
        let twice = format!("{dup}{}", dup.trim_start_matches("schema_version = 1\n"));
        assert!(CameraRig::from_manifest_str(dup).is_ok());
        assert!(matches!(
            CameraRig::from_manifest_str(&twice),
            Err(Error::DuplicateCameraId(1))
        ));
    }

    #[test]
    fn look_at_orientation() {
        let cam = CameraModel::look_at(0, 640, 480, 500.0, Vector3::new(0.0, -5000.0, 0.0), Vector3::zeros());
        cam.validate().unwrap();
        assert!((cam.center() - Vector3::new(0.0, -5000.0, 0.0)).norm() < 1e-9);
        // World +x appears to the right, world +z appears up (smaller v).
        let right = cam.project(&Vector3::new(100.0, 0.0, 0.0)).pixel;
        let up = cam.project(&Vector3::new(0.0, 0.0, 100.0)).pixel;
        assert!(right.x > cam.cx);
        assert!(up.y < cam.cy);
    }

    #[test]
    fn undistort_inverts_distort() {
        let mut cam = identity_cam();
        cam.dist = [0.1, -0.05, 0.001, 0.002, 0.01];
        for &(x, y) in &[(0.1, 0.2), (-0.3, 0.05), (0.0, 0.0), (0.25, -0.25)] {
            let (xd, yd) = cam.distort(x, y);
            let (ux, uy) = cam.undistort(xd, yd);
            assert!((ux - x).abs() < 1e-12 && (uy - y).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_cam() -> impl Strategy<Value = CameraModel> {
            (
                -5000.0..5000.0f64,
                -5000.0..5000.0f64,
                500.0..3000.0f64,
                300.0..2000.0f64,
            )
                .prop_map(|(x, y, z, f)| {
                    CameraModel::look_at(1, 1920, 1080, f, Vector3::new(x, y, z), Vector3::new(1.0, 2.0, 3.0))
                })
        }

        proptest! {
            #[test]
            fn projection_is_scale_invariant(cam in arb_cam(), px in -500.0..500.0f64, py in -500.0..500.0f64, pz in -500.0..500.0f64, alpha in 0.1..10.0f64) {
                let p = Vector3::new(px, py, pz);
                let pc = cam.to_camera(&p);
                prop_assume!(pc.z > 1.0);
                // Scaling in camera space along the viewing ray.
                let q = cam.to_world(&(pc * alpha));
                let a = cam.project(&p);
                let b = cam.project(&q);
                prop_assert!((a.pixel - b.pixel).norm() < 1e-6);
                prop_assert!((b.depth - alpha * a.depth).abs() < 1e-6 * b.depth.abs().max(1.0));
            }

            #[test]
            fn backprojection_round_trips(cam in arb_cam(), px in -500.0..500.0f64, py in -500.0..500.0f64, pz in -500.0..500.0f64) {
                let p = Vector3::new(px, py, pz);
                let proj = cam.project(&p);
                prop_assume!(proj.depth > 1.0);
                let back = cam.backproject(&proj.pixel, proj.depth);
                prop_assert!((back - p).norm() < 1e-6, "{:?} vs {:?}", back, p);
            }
        }
    }
}
