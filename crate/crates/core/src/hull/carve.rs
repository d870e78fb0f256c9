use nalgebra::Vector3;
use rayon::prelude::*;

use super::cull::{classify_ball, BrickView, Bricks, TileIndex};
use super::grid::{GridSpec, VoxelGrid};

use crate::calib::{CameraModel, CameraRig};
use crate::error::{Error, Result};
use crate::silhouette::Mask;

/// Counters reported by a carve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CarveStats {
    /// Voxels whose occupancy was tested.
    pub tested: u64,
    pub occupied: u64,
}

/// Camera-space voxel centres split per axis: `R·c + t` is the sum of one
/// entry from each table. Entries depend only on the global lattice index, so
/// a sub-grid sees the same values as its parent.
struct AxisTables {
    x: Vec<Vector3<f64>>,
    y: Vec<Vector3<f64>>,
    z: Vec<Vector3<f64>>,
}

impl AxisTables {
    fn new(cam: &CameraModel, spec: &GridSpec) -> Self {
        let axis = |a: usize| -> Vec<Vector3<f64>> {
            let col = cam.rotation.column(a).into_owned();
            (0..spec.dims[a])
                .map(|i| {
                    let c = spec.origin[a] + ((spec.offset[a] + i) as f64 + 0.5) * spec.spacing;
                    col * c
                })
                .collect()
        };
        let mut z = axis(2);
        for v in &mut z {
            *v += cam.translation;
        }
        Self {
            x: axis(0),
            y: axis(1),
            z,
        }
    }

    #[inline]
    fn camera_point(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        (self.x[i] + self.y[j]) + self.z[k]
    }
}

/// Grids smaller than this skip brick culling; building the tile indices
/// would cost more than it saves.
const CULL_MIN_VOXELS: usize = 1 << 15;

/// Per brick, the cameras whose per-voxel test can still matter (bit per
/// camera index). Zero means every voxel of the brick is OFF.
fn brick_cameras(rig: &CameraRig, sils: &[Mask], spec: &GridSpec, bricks: &Bricks, min_views: usize) -> Option<Vec<u64>> {
    let cams = rig.cameras();
    if spec.len() < CULL_MIN_VOXELS || min_views == 0 || cams.len() > 64 || cams.iter().all(|c| c.has_distortion()) {
        return None;
    }
    let tiles: Vec<TileIndex> = sils.par_iter().map(TileIndex::new).collect();
    let states = (0..bricks.len())
        .into_par_iter()
        .map(|b| {
            let (centre, r) = bricks.ball(spec, b);
            let mut mask = 0u64;
            for (c, (cam, t)) in cams.iter().zip(&tiles).enumerate() {
                match classify_ball(cam, t, &centre, r) {
                    BrickView::Rejects => return 0,
                    BrickView::Abstains => {}
                    BrickView::Unknown => mask |= 1 << c,
                }
            }
            if (mask.count_ones() as usize) < min_views {
                0
            } else {
                mask
            }
        })
        .collect();
    Some(states)
}

pub(crate) fn check_silhouettes(rig: &CameraRig, sils: &[Mask]) -> Result<()> {
    if sils.len() != rig.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} silhouettes for {} cameras",
            sils.len(),
            rig.len()
        )));
    }
    for (cam, sil) in rig.iter().zip(sils) {
        if sil.dims() != (cam.width, cam.height) {
            return Err(Error::DimensionMismatch(format!(
                "silhouette {}x{} for camera {} of size {}x{}",
                sil.width(),
                sil.height(),
                cam.id,
                cam.width,
                cam.height
            )));
        }
    }
    Ok(())
}

/// Shape-from-silhouette occupancy test on voxel centres.
///
/// A voxel is ON iff at least `min_views` cameras see its centre and every
/// camera that sees it projects it onto a foreground pixel. Cameras that do
/// not see the centre abstain.
pub fn carve(rig: &CameraRig, sils: &[Mask], spec: &GridSpec, min_views: usize) -> Result<VoxelGrid> {
    carve_with_stats(rig, sils, spec, min_views).map(|(g, _)| g)
}

pub fn carve_with_stats(
    rig: &CameraRig,
    sils: &[Mask],
    spec: &GridSpec,
    min_views: usize,
) -> Result<(VoxelGrid, CarveStats)> {
    carve_impl(rig, sils, spec, min_views, true)
}

fn carve_impl(
    rig: &CameraRig,
    sils: &[Mask],
    spec: &GridSpec,
    min_views: usize,
    cull: bool,
) -> Result<(VoxelGrid, CarveStats)> {
    check_silhouettes(rig, sils)?;
    let n = spec.len();
    let cams = rig.cameras();
    let mut words = vec![0u64; n.div_ceil(64)];

    let tables: Vec<AxisTables> = cams.iter().map(|c| AxisTables::new(c, spec)).collect();
    let [nx, ny, _] = spec.dims;
    let bricks = Bricks::new(spec);
    let brick_cams = if cull { brick_cameras(rig, sils, spec, &bricks, min_views) } else { None };

    words.par_iter_mut().enumerate().for_each(|(wi, word)| {
        let start = wi * 64;
        let end = (start + 64).min(n);
        let [mut i, mut j, mut k] = spec.coords(start);
        let mut bits = 0u64;
        for idx in start..end {
            let mut seen = 0usize;
            let mut rejected = false;
            let candidates = match &brick_cams {
                Some(b) => b[bricks.index_of_voxel(i, j, k)],
                None => u64::MAX,
            };
            if candidates == 0 {
                rejected = true;
            }
            for (c, ((cam, sil), tab)) in cams.iter().zip(sils).zip(&tables).enumerate() {
                if rejected {
                    break;
                }
                if candidates & (1 << c) == 0 {
                    continue;
                }
                let p = cam.project_camera_point(&tab.camera_point(i, j, k), true);
                if !p.in_frustum {
                    continue;
                }
                seen += 1;
                let (u, v) = p.nearest_pixel();
                if !sil.get(u, v) {
                    rejected = true;
                    break;
                }
            }
            if !rejected && seen >= min_views {
                bits |= 1 << (idx - start);
            }
            i += 1;
            if i == nx {
                i = 0;
                j += 1;
                if j == ny {
                    j = 0;
                    k += 1;
                }
            }
        }
        *word = bits;
    });

    let grid = VoxelGrid::from_words(*spec, words);
    let stats = CarveStats {
        tested: n as u64,
        occupied: grid.count_on() as u64,
    };
    Ok((grid, stats))
}
