use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::isovalue::edge_isovalue;
use super::tables::{CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE};
use super::TriangleMesh;
use crate::calib::CameraRig;
use crate::error::Result;
use crate::hull::{check_silhouettes, VoxelGrid};
use crate::silhouette::Mask;

/// Triangles with area below this (mm²) are dropped.
pub const DEGENERATE_AREA: f64 = 1e-9;

/// How the crossing point on each ON–OFF cell edge is placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsoMode {
    /// Minimum over cameras of the silhouette-boundary crossing.
    Exact,
    /// Constant fraction from the ON corner.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolygonizeStats {
    /// Intersected grid edges (= emitted vertices).
    pub edges: u64,
    /// Edges no camera saw; placed at the fallback crossing.
    pub fallback_edges: u64,
    /// Edges where some camera saw the ON corner on background.
    pub inconsistent_edges: u64,
    pub degenerate_dropped: u64,
}

/// Edge key: `3 · (lower voxel index) + axis`.
#[inline]
fn edge_key(idx: usize, axis: usize) -> u64 {
    3 * idx as u64 + axis as u64
}

/// Marching cubes over cells whose corners are voxel centres.
///
/// Cells on the grid boundary close nothing outside the grid, so ON voxels
/// touching the boundary leave the surface open there.
pub fn polygonize(
    grid: &VoxelGrid,
    rig: &CameraRig,
    sils: &[Mask],
    mode: IsoMode,
    object_id: u32,
) -> Result<(TriangleMesh, PolygonizeStats)> {
    if let IsoMode::Exact = mode {
        check_silhouettes(rig, sils)?;
    }
    if let IsoMode::Fixed(l) = mode {
        if !(0.0..=1.0).contains(&l) {
            return Err(crate::Error::InvalidParameter(format!("fixed isovalue {l} outside [0, 1]")));
        }
    }
    let spec = grid.spec;
    let d = spec.dims;
    let mut stats = PolygonizeStats::default();
    if d.iter().any(|&n| n < 2) {
        return Ok((TriangleMesh::default(), stats));
    }

    // Every ON–OFF edge, enumerated from its ON end, sorted by key.
    let mut edges: Vec<(u64, usize, usize)> = Vec::new();
    for on in grid.iter_on() {
        let c = spec.coords(on);
        for axis in 0..3 {
            for dir in [-1i64, 1] {
                let mut n = [c[0] as i64, c[1] as i64, c[2] as i64];
                n[axis] += dir;
                if n[axis] < 0 || n[axis] >= d[axis] as i64 {
                    continue;
                }
                let off = spec.index(n[0] as usize, n[1] as usize, n[2] as usize);
                if grid.get(off) {
                    continue;
                }
                edges.push((edge_key(on.min(off), axis), on, off));
            }
        }
    }
    edges.sort_unstable_by_key(|e| e.0);

    let placed: Vec<(Vector3<f64>, bool, bool)> = edges
        .par_iter()
        .map(|&(_, on, off)| {
            let (p_on, p_off) = (spec.center_of(on), spec.center_of(off));
            match mode {
                IsoMode::Fixed(l) => (p_on + (p_off - p_on) * l, false, false),
                IsoMode::Exact => {
                    let e = edge_isovalue(rig, sils, &p_on, &p_off);
                    (e.point(), e.is_fallback(), e.inconsistent)
                }
            }
        })
        .collect();
    stats.edges = edges.len() as u64;
    stats.fallback_edges = placed.iter().filter(|p| p.1).count() as u64;
    stats.inconsistent_edges = placed.iter().filter(|p| p.2).count() as u64;
    let keys: Vec<u64> = edges.iter().map(|e| e.0).collect();
    let vertices: Vec<Vector3<f64>> = placed.into_iter().map(|p| p.0).collect();

    // Per-slab triangle lists, concatenated in slab order.
    let slabs: Vec<(Vec<[u32; 3]>, u64)> = (0..d[2] - 1)
        .into_par_iter()
        .map(|k| {
            let mut tris = Vec::new();
            let mut dropped = 0u64;
            for j in 0..d[1] - 1 {
                for i in 0..d[0] - 1 {
                    let mut case = 0usize;
                    for (bit, o) in CORNER_OFFSETS.iter().enumerate() {
                        if grid.get_ijk(i + o[0], j + o[1], k + o[2]) {
                            case |= 1 << bit;
                        }
                    }
                    if case == 0 || case == 255 {
                        continue;
                    }
                    let vertex_of = |edge: i8| -> u32 {
                        let [a, b] = EDGE_CORNERS[edge as usize];
                        let (oa, ob) = (CORNER_OFFSETS[a], CORNER_OFFSETS[b]);
                        let axis = (0..3).find(|&ax| oa[ax] != ob[ax]).unwrap();
                        let lo = if oa[axis] < ob[axis] { oa } else { ob };
                        let key = edge_key(spec.index(i + lo[0], j + lo[1], k + lo[2]), axis);
                        keys.binary_search(&key).expect("intersected edge enumerated") as u32
                    };
                    for tri in TRI_TABLE[case].chunks_exact(3).take_while(|t| t[0] >= 0) {
                        // Table winding faces the ON corners; reverse for outward normals.
                        let t = [vertex_of(tri[0]), vertex_of(tri[2]), vertex_of(tri[1])];
                        let [a, b, c] = t.map(|v| vertices[v as usize]);
                        if 0.5 * (b - a).cross(&(c - a)).norm() < DEGENERATE_AREA {
                            dropped += 1;
                            continue;
                        }
                        tris.push(t);
                    }
                }
            }
            (tris, dropped)
        })
        .collect();

    let mut triangles = Vec::new();
    for (tris, dropped) in slabs {
        triangles.extend(tris);
        stats.degenerate_dropped += dropped;
    }
    if stats.fallback_edges > 0 {
        log::debug!("{} of {} edges used the fallback crossing", stats.fallback_edges, stats.edges);
    }
    let object_ids = vec![object_id; triangles.len()];
    Ok((
        TriangleMesh {
            vertices,
            triangles,
            object_ids,
        },
        stats,
    ))
}
