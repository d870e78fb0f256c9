//! 3D connected-components labeling under 26-adjacency.
//!
//! The grid is split into independent blocks. Each block is labeled on its
//! own with a union-find whose roots are the minimum voxel index of the local
//! set; a second pass merges equivalences across block faces, edges and
//! corners. Because every union keeps the smaller index as root, the final
//! root of a component is its minimum linear index regardless of the block
//! layout, and labels are numbered in that order.

use rayon::prelude::*;

use super::grid::VoxelGrid;

/// Half of the 26-neighbourhood: offsets that precede a voxel in linear order.
pub(crate) const BACKWARD_26: [[i64; 3]; 13] = [
    [-1, -1, -1],
    [0, -1, -1],
    [1, -1, -1],
    [-1, 0, -1],
    [0, 0, -1],
    [1, 0, -1],
    [-1, 1, -1],
    [0, 1, -1],
    [1, 1, -1],
    [-1, -1, 0],
    [0, -1, 0],
    [1, -1, 0],
    [-1, 0, 0],
];

/// One connected set of ON voxels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Label, starting at 1.
    pub id: u32,
    pub voxel_count: u64,
    /// Inclusive voxel-index bounds.
    pub bbox_min: [usize; 3],
    pub bbox_max: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    pub dims: [usize; 3],
    /// Per-voxel component id, 0 for background.
    pub labels: Vec<u32>,
    pub components: Vec<Component>,
}

impl Labeling {
    pub fn component(&self, id: u32) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn total_voxels(&self) -> u64 {
        self.components.iter().map(|c| c.voxel_count).sum()
    }
}

const NONE: u32 = u32::MAX;

#[inline]
fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let next = parent[parent[x as usize] as usize];
        parent[x as usize] = next;
        x = next;
    }
    x
}

#[inline]
fn union_min(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra < rb {
        parent[rb as usize] = ra;
    } else if rb < ra {
        parent[ra as usize] = rb;
    }
}

/// Labels ON voxels of `grid` with blocks of `block_dims` voxels processed independently.
pub fn label_components(grid: &VoxelGrid, block_dims: [usize; 3]) -> Labeling {
    let spec = grid.spec;
    let dims = spec.dims;
    let n = spec.len();
    let bd = [0, 1, 2].map(|a| block_dims[a].clamp(1, dims[a].max(1)));
    let nblocks = [0, 1, 2].map(|a| dims[a].div_ceil(bd[a]));

    // Local phase: one union-find per block, roots reported as global indices.
    let block_ids: Vec<[usize; 3]> = (0..nblocks[2])
        .flat_map(|bz| (0..nblocks[1]).flat_map(move |by| (0..nblocks[0]).map(move |bx| [bx, by, bz])))
        .collect();
    let local: Vec<Vec<(u32, u32)>> = block_ids
        .par_iter()
        .map(|b| {
            let lo = [0, 1, 2].map(|a| b[a] * bd[a]);
            let hi = [0, 1, 2].map(|a| (lo[a] + bd[a]).min(dims[a]));
            let ld = [0, 1, 2].map(|a| hi[a] - lo[a]);
            let lidx = |x: usize, y: usize, z: usize| (x + ld[0] * (y + ld[1] * z)) as u32;
            let mut parent = vec![NONE; ld[0] * ld[1] * ld[2]];
            let mut on = Vec::new();
            for z in 0..ld[2] {
                for y in 0..ld[1] {
                    for x in 0..ld[0] {
                        let g = spec.index(lo[0] + x, lo[1] + y, lo[2] + z);
                        if !grid.get(g) {
                            continue;
                        }
                        let l = lidx(x, y, z);
                        parent[l as usize] = l;
                        on.push((g as u32, l));
                        for [dx, dy, dz] in BACKWARD_26 {
                            let (nx, ny, nz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                            if nx < 0 || ny < 0 || nz < 0 || nx >= ld[0] as i64 || ny >= ld[1] as i64 {
                                continue;
                            }
                            let nl = lidx(nx as usize, ny as usize, nz as usize);
                            if parent[nl as usize] != NONE {
                                union_min(&mut parent, l, nl);
                            }
                        }
                    }
                }
            }
            on.into_iter()
                .map(|(g, l)| {
                    let r = find(&mut parent, l) as usize;
                    let (rx, ry, rz) = (r % ld[0], (r / ld[0]) % ld[1], r / (ld[0] * ld[1]));
                    (g, spec.index(lo[0] + rx, lo[1] + ry, lo[2] + rz) as u32)
                })
                .collect()
        })
        .collect();

    // Global phase: seed with local roots, then merge across block boundaries.
    let mut parent = vec![NONE; n];
    for block in &local {
        for &(g, r) in block {
            parent[g as usize] = r;
        }
    }
    drop(local);
    let block_of = |c: [usize; 3]| [c[0] / bd[0], c[1] / bd[1], c[2] / bd[2]];
    let on_face = |c: [usize; 3]| (0..3).any(|a| c[a].is_multiple_of(bd[a]) || c[a] % bd[a] == bd[a] - 1);
    for g in grid.iter_on() {
        let c = spec.coords(g);
        if !on_face(c) {
            continue;
        }
        let b = block_of(c);
        for [dx, dy, dz] in BACKWARD_26 {
            let nc = [c[0] as i64 + dx, c[1] as i64 + dy, c[2] as i64 + dz];
            if !grid.get_signed(nc[0], nc[1], nc[2]) {
                continue;
            }
            let nc = nc.map(|v| v as usize);
            if block_of(nc) != b {
                union_min(&mut parent, g as u32, spec.index(nc[0], nc[1], nc[2]) as u32);
            }
        }
    }

    // Roots are component minima, so ascending scan meets each root first.
    let mut labels = vec![0u32; n];
    let mut components: Vec<Component> = Vec::new();
    for g in grid.iter_on() {
        let r = find(&mut parent, g as u32) as usize;
        let c = spec.coords(g);
        let id = if r == g {
            let id = components.len() as u32 + 1;
            components.push(Component {
                id,
                voxel_count: 0,
                bbox_min: c,
                bbox_max: c,
            });
            id
        } else {
            labels[r]
        };
        labels[g] = id;
        let comp = &mut components[id as usize - 1];
        comp.voxel_count += 1;
        for (a, &ca) in c.iter().enumerate() {
            comp.bbox_min[a] = comp.bbox_min[a].min(ca);
            comp.bbox_max[a] = comp.bbox_max[a].max(ca);
        }
    }

    Labeling {
        dims,
        labels,
        components,
    }
}
