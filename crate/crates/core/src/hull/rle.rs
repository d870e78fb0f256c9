//! Run-length debug dump of a [`VoxelGrid`].
//!
//! Byte layout (little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `VXG1`                            |
//! | 4      | 12   | dims `nx, ny, nz` as `u32`              |
//! | 16     | 8    | spacing `f64` (mm)                      |
//! | 24     | 24   | lattice origin `x, y, z` as `f64` (mm)  |
//! | 48     | 12   | lattice offset `i, j, k` as `u32`       |
//! | 60     | 4    | run count `r` as `u32`                  |
//! | 64     | 4·r  | run lengths `u32`, alternating OFF/ON, first run OFF (may be 0) |

use std::io::{Read, Write};

use nalgebra::Vector3;

use super::grid::{GridSpec, VoxelGrid};
use crate::error::{Error, Result};

pub const RLE_MAGIC: &[u8; 4] = b"VXG1";

pub fn write_rle(grid: &VoxelGrid, mut w: impl Write) -> std::io::Result<()> {
    let s = &grid.spec;
    let mut runs: Vec<u32> = Vec::new();
    let mut state = false;
    let mut len = 0u32;
    for idx in 0..grid.len() {
        if grid.get(idx) != state {
            runs.push(len);
            state = !state;
            len = 0;
        }
        len += 1;
    }
    runs.push(len);

    w.write_all(RLE_MAGIC)?;
    for d in s.dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&s.spacing.to_le_bytes())?;
    for a in 0..3 {
        w.write_all(&s.origin[a].to_le_bytes())?;
    }
    for o in s.offset {
        w.write_all(&(o as u32).to_le_bytes())?;
    }
    w.write_all(&(runs.len() as u32).to_le_bytes())?;
    for r in runs {
        w.write_all(&r.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_rle(mut r: impl Read) -> Result<VoxelGrid> {
    let bad = |m: &str| Error::Parse {
        what: "voxel RLE dump".into(),
        message: m.into(),
    };
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| bad(&e.to_string()))?;
    if buf.len() < 64 || &buf[..4] != RLE_MAGIC {
        return Err(bad("bad magic or truncated header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    let dims = [u32_at(4), u32_at(8), u32_at(12)].map(|d| d as usize);
    let spacing = f64_at(16);
    let origin = Vector3::new(f64_at(24), f64_at(32), f64_at(40));
    let offset = [u32_at(48), u32_at(52), u32_at(56)].map(|d| d as usize);
    let nruns = u32_at(60) as usize;
    if buf.len() != 64 + 4 * nruns {
        return Err(bad("run table length mismatch"));
    }
    let mut spec = GridSpec::new(origin, spacing, dims, u64::MAX)?;
    spec.offset = offset;
    let mut grid = VoxelGrid::empty(spec);
    let mut idx = 0usize;
    for i in 0..nruns {
        let len = u32_at(64 + 4 * i) as usize;
        if idx + len > grid.len() {
            return Err(bad("runs exceed grid size"));
        }
        if i % 2 == 1 {
            for v in idx..idx + len {
                grid.set(v, true);
            }
        }
        idx += len;
    }
    if idx != grid.len() {
        return Err(bad("runs do not cover the grid"));
    }
    Ok(grid)
}
