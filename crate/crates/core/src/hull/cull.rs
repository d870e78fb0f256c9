//! Conservative brick-level culling for the carve.
//!
//! A brick is a small block of voxels. For an undistorted camera the
//! projections of all voxel centres in a brick lie inside a pixel rectangle
//! that is cheap to bound. If that rectangle is entirely inside the image and
//! contains no foreground, every voxel in the brick is rejected by that camera.
//! If it is entirely outside the image (or behind the camera), the camera
//! abstains for the whole brick. Both outcomes are exactly what the per-voxel
//! test would conclude, so culling never changes a carve result.

use nalgebra::Vector3;

use super::grid::GridSpec;
use crate::calib::CameraModel;
use crate::silhouette::Mask;

/// Voxels per brick edge.
pub(crate) const BRICK: usize = 8;
const TILE: u32 = 16;
/// Pixel slack added to every projected bound (covers rounding and float error).
const SLACK: f64 = 1.0;
/// Bricks closer than this to the camera plane are never culled (mm).
const MIN_DEPTH: f64 = 1.0;

/// Per-tile foreground counts with a summed-area table over tiles.
pub(crate) struct TileIndex {
    tw: usize,
    th: usize,
    sat: Vec<u32>,
}

impl TileIndex {
    pub(crate) fn new(mask: &Mask) -> Self {
        let (w, h) = mask.dims();
        let tw = w.div_ceil(TILE) as usize;
        let th = h.div_ceil(TILE) as usize;
        let mut counts = vec![0u32; tw * th];
        for (y, row) in mask.bits().chunks(w as usize).enumerate() {
            let ty = y / TILE as usize;
            for (tx, chunk) in row.chunks(TILE as usize).enumerate() {
                if chunk.iter().any(|&b| b) {
                    counts[ty * tw + tx] += 1;
                }
            }
        }
        let mut sat = vec![0u32; (tw + 1) * (th + 1)];
        for ty in 0..th {
            let mut row = 0u32;
            for tx in 0..tw {
                row += counts[ty * tw + tx];
                sat[(ty + 1) * (tw + 1) + tx + 1] = sat[ty * (tw + 1) + tx + 1] + row;
            }
        }
        Self { tw, th, sat }
    }

    /// True when any pixel in the inclusive rectangle might be foreground.
    fn any_foreground(&self, x0: u32, y0: u32, x1: u32, y1: u32) -> bool {
        let tx0 = (x0 / TILE) as usize;
        let ty0 = (y0 / TILE) as usize;
        let tx1 = ((x1 / TILE) as usize).min(self.tw - 1) + 1;
        let ty1 = ((y1 / TILE) as usize).min(self.th - 1) + 1;
        let s = |x: usize, y: usize| self.sat[y * (self.tw + 1) + x];
        s(tx1, ty1) + s(tx0, ty0) != s(tx0, ty1) + s(tx1, ty0)
    }
}

/// What one camera can say about a whole brick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BrickView {
    Unknown,
    Abstains,
    Rejects,
}

/// Classifies the ball of radius `r` around `centre` (world) for `cam`.
pub(crate) fn classify_ball(cam: &CameraModel, tiles: &TileIndex, centre: &Vector3<f64>, r: f64) -> BrickView {
    if cam.has_distortion() {
        return BrickView::Unknown;
    }
    let pc = cam.to_camera(centre);
    if pc.z + r < 0.0 {
        return BrickView::Abstains;
    }
    if pc.z - r < MIN_DEPTH {
        return BrickView::Unknown;
    }
    // |x/z - xc/zc| <= r (zc + |xc|) / ((zc - r) zc) for any point within r of the centre.
    let denom = (pc.z - r) * pc.z;
    let ex = r * (pc.z + pc.x.abs()) / denom;
    let ey = r * (pc.z + pc.y.abs()) / denom;
    let (x, y) = (pc.x / pc.z, pc.y / pc.z);
    let uc = cam.fx * (x + cam.skew * y) + cam.cx;
    let vc = cam.fy * y + cam.cy;
    let du = cam.fx * (ex + cam.skew.abs() * ey) + SLACK;
    let dv = cam.fy * ey + SLACK;
    let (umin, umax, vmin, vmax) = (uc - du, uc + du, vc - dv, vc + dv);
    let (w, h) = (cam.width as f64 - 0.5, cam.height as f64 - 0.5);
    if umax < -0.5 || vmax < -0.5 || umin >= w || vmin >= h {
        return BrickView::Abstains;
    }
    if umin < -0.5 || vmin < -0.5 || umax >= w || vmax >= h {
        return BrickView::Unknown;
    }
    let x0 = (umin + 0.5).floor() as u32;
    let y0 = (vmin + 0.5).floor() as u32;
    let x1 = (umax + 0.5).floor() as u32;
    let y1 = (vmax + 0.5).floor() as u32;
    if tiles.any_foreground(x0, y0, x1, y1) {
        BrickView::Unknown
    } else {
        BrickView::Rejects
    }
}

/// Brick layout over a grid.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Bricks {
    pub dims: [usize; 3],
}

impl Bricks {
    pub(crate) fn new(spec: &GridSpec) -> Self {
        Self {
            dims: spec.dims.map(|d| d.div_ceil(BRICK)),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.dims.iter().product()
    }

    #[inline]
    pub(crate) fn index_of_voxel(&self, i: usize, j: usize, k: usize) -> usize {
        i / BRICK + self.dims[0] * (j / BRICK + self.dims[1] * (k / BRICK))
    }

    /// Centre and radius of the ball holding every voxel centre in brick `b`.
    pub(crate) fn ball(&self, spec: &GridSpec, b: usize) -> (Vector3<f64>, f64) {
        let bi = b % self.dims[0];
        let r = b / self.dims[0];
        let (bj, bk) = (r % self.dims[1], r / self.dims[1]);
        let lo = [bi * BRICK, bj * BRICK, bk * BRICK];
        let hi = [0, 1, 2].map(|a| ((lo[a] + BRICK).min(spec.dims[a])) - 1);
        let a = spec.center(lo[0], lo[1], lo[2]);
        let z = spec.center(hi[0], hi[1], hi[2]);
        let centre = (a + z) * 0.5;
        // Slightly inflated so the ball also covers float error in voxel centres.
        let radius = (z - a).norm() * 0.5 * (1.0 + 1e-9) + 1e-6 * spec.spacing;
        (centre, radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tile_query_matches_scan() {
        let mut m = Mask::new(100, 70);
        m.set(37, 41, true);
        let t = TileIndex::new(&m);
        assert!(t.any_foreground(30, 40, 40, 45));
        assert!(t.any_foreground(0, 0, 99, 69));
        assert!(!t.any_foreground(0, 0, 31, 31));
        assert!(!t.any_foreground(48, 0, 99, 69));
    }

    #[test]
    fn ball_covers_projected_centres() {
        let cam = CameraModel::look_at(0, 640, 480, 500.0, Vector3::new(3000.0, 0.0, 500.0), Vector3::zeros());
        let spec = GridSpec::new(Vector3::new(-200.0, -200.0, -200.0), 20.0, [20, 20, 20], u64::MAX).unwrap();
        let bricks = Bricks::new(&spec);
        for b in 0..bricks.len() {
            let (c, r) = bricks.ball(&spec, b);
            for idx in 0..spec.len() {
                let [i, j, k] = spec.coords(idx);
                if bricks.index_of_voxel(i, j, k) == b {
                    assert!((spec.center(i, j, k) - c).norm() <= r);
                }
            }
            let full = Mask::filled(640, 480, false);
            let view = classify_ball(&cam, &TileIndex::new(&full), &c, r);
            assert_eq!(view, BrickView::Rejects);
        }
    }
}
