//! Scanline-free triangle rasterizer over pixel centres.
//!
//! Edge functions are evaluated with endpoints in a canonical order so that
//! the two triangles sharing an edge see exactly negated values, and the
//! top-left rule then assigns every shared-edge pixel to exactly one side.

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use crate::calib::CameraModel;
use crate::mesh::TriangleMesh;

/// Triangles with any vertex at or closer than this camera depth (mm) are
/// not rasterized.
pub const NEAR_PLANE: f64 = 1.0;
pub const NO_TRIANGLE: u32 = u32::MAX;
const BAND_ROWS: usize = 16;

/// Per-pixel nearest depth and the triangle that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
    pub triangle: Vec<u32>,
}

struct Projected {
    p: [Vector2<f64>; 3],
    inv_z: [f64; 3],
    /// Inclusive pixel bounds `[x0, x1, y0, y1]`.
    bbox: [i64; 4],
}

#[inline]
fn lex_less(a: &Vector2<f64>, b: &Vector2<f64>) -> bool {
    (a.x, a.y) < (b.x, b.y)
}

/// `(b - a) × (p - a)`, evaluated in canonical endpoint order.
#[inline]
fn edge(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> f64 {
    if lex_less(b, a) {
        -edge_raw(b, a, p)
    } else {
        edge_raw(a, b, p)
    }
}

#[inline]
fn edge_raw(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Top or left edge of a positively oriented triangle (image y down).
#[inline]
fn is_top_left(a: &Vector2<f64>, b: &Vector2<f64>) -> bool {
    let d = b - a;
    d.y < 0.0 || (d.y == 0.0 && d.x > 0.0)
}

#[inline]
fn covers(w: f64, top_left: bool) -> bool {
    w > 0.0 || (w == 0.0 && top_left)
}

fn project(mesh: &TriangleMesh, cam: &CameraModel, t: usize) -> Option<Projected> {
    let pc = mesh.corners(t).map(|v| cam.to_camera(&v));
    if pc.iter().any(|p| !(p.z > NEAR_PLANE) || !p.iter().all(|c| c.is_finite())) {
        return None;
    }
    let mut p = pc.map(|q| cam.apply_intrinsics(q.x / q.z, q.y / q.z));
    let mut inv_z = pc.map(|q| 1.0 / q.z);
    let area = edge(&p[0], &p[1], &p[2]);
    if area == 0.0 || !area.is_finite() {
        return None;
    }
    if area < 0.0 {
        p.swap(1, 2);
        inv_z.swap(1, 2);
    }
    let (w, h) = (cam.width as i64, cam.height as i64);
    let min_x = p.iter().map(|q| q.x).fold(f64::INFINITY, f64::min).ceil();
    let max_x = p.iter().map(|q| q.x).fold(f64::NEG_INFINITY, f64::max).floor();
    let min_y = p.iter().map(|q| q.y).fold(f64::INFINITY, f64::min).ceil();
    let max_y = p.iter().map(|q| q.y).fold(f64::NEG_INFINITY, f64::max).floor();
    let bbox = [
        (min_x.max(0.0) as i64).min(w),
        (max_x.min((w - 1) as f64) as i64).max(-1),
        (min_y.max(0.0) as i64).min(h),
        (max_y.min((h - 1) as f64) as i64).max(-1),
    ];
    if bbox[0] > bbox[1] || bbox[2] > bbox[3] {
        return None;
    }
    Some(Projected { p, inv_z, bbox })
}

/// Rasterizes `mesh` into `cam` with the linear pinhole projection. Each pixel
/// keeps the smallest camera depth, ties going to the lower triangle index,
/// so the result does not depend on triangle order.
pub fn rasterize(mesh: &TriangleMesh, cam: &CameraModel) -> Raster {
    let (w, h) = (cam.width as usize, cam.height as usize);
    let projected: Vec<Option<Projected>> =
        (0..mesh.triangle_count()).into_par_iter().map(|t| project(mesh, cam, t)).collect();

    let n_bands = h.div_ceil(BAND_ROWS);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); n_bands];
    for (t, pr) in projected.iter().enumerate() {
        if let Some(pr) = pr {
            for bin in &mut bins[pr.bbox[2] as usize / BAND_ROWS..=pr.bbox[3] as usize / BAND_ROWS] {
                bin.push(t as u32);
            }
        }
    }

    let mut depth = vec![f64::INFINITY; w * h];
    let mut triangle = vec![NO_TRIANGLE; w * h];
    depth
        .par_chunks_mut(w * BAND_ROWS)
        .zip(triangle.par_chunks_mut(w * BAND_ROWS))
        .zip(bins.par_iter())
        .enumerate()
        .for_each(|(band, ((depth, triangle), bin))| {
            let y0 = (band * BAND_ROWS) as i64;
            let y1 = y0 + (depth.len() / w) as i64 - 1;
            for &t in bin {
                let pr = projected[t as usize].as_ref().unwrap();
                let [a, b, c] = &pr.p;
                let tl = [is_top_left(b, c), is_top_left(c, a), is_top_left(a, b)];
                for y in pr.bbox[2].max(y0)..=pr.bbox[3].min(y1) {
                    for x in pr.bbox[0]..=pr.bbox[1] {
                        let q = Vector2::new(x as f64, y as f64);
                        let e = [edge(b, c, &q), edge(c, a, &q), edge(a, b, &q)];
                        if !(0..3).all(|k| covers(e[k], tl[k])) {
                            continue;
                        }
                        let sum = e[0] + e[1] + e[2];
                        let inv = (e[0] * pr.inv_z[0] + e[1] * pr.inv_z[1] + e[2] * pr.inv_z[2]) / sum;
                        let z = 1.0 / inv;
                        let i = (y - y0) as usize * w + x as usize;
                        if z < depth[i] || (z == depth[i] && t < triangle[i]) {
                            depth[i] = z;
                            triangle[i] = t;
                        }
                    }
                }
            }
        });

    Raster {
        width: cam.width,
        height: cam.height,
        depth,
        triangle,
    }
}

/// Camera-space point seen through pixel `(x, y)` at camera depth `z`, using
/// the same linear projection as [`rasterize`].
pub fn unproject_linear(cam: &CameraModel, x: f64, y: f64, z: f64) -> Vector3<f64> {
    let (xn, yn) = cam.remove_intrinsics(&Vector2::new(x, y));
    cam.to_world(&Vector3::new(xn * z, yn * z, z))
}
