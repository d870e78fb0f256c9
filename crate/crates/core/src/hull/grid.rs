use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geom::Aabb;

/// Default cap on the number of voxels in a single grid (≈1.3×10⁸, 16 MB of bits).
pub const DEFAULT_VOXEL_BUDGET: u64 = 1 << 27;

/// Isotropic voxel lattice. Voxel `(i, j, k)` has centre
/// `origin + spacing · (offset + (i, j, k) + ½)` and linear index `i + nx·(j + ny·k)`.
///
/// `offset` is nonzero only for sub-grids cut out of a larger lattice, so that
/// a sub-grid voxel and the matching voxel of its parent have bit-identical
/// centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Lattice anchor (mm).
    pub origin: Vector3<f64>,
    pub spacing: f64,
    pub dims: [usize; 3],
    pub offset: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: Vector3<f64>, spacing: f64, dims: [usize; 3], budget: u64) -> Result<Self> {
        let spec = Self {
            origin,
            spacing,
            dims,
            offset: [0; 3],
        };
        spec.validate(budget)?;
        Ok(spec)
    }

    /// Voxels `lo..hi` (per axis, exclusive) of this lattice as a grid of their own.
    pub fn subgrid(&self, lo: [usize; 3], hi: [usize; 3], budget: u64) -> Result<Self> {
        if (0..3).any(|a| hi[a] <= lo[a] || hi[a] > self.dims[a]) {
            return Err(Error::InvalidParameter(format!(
                "sub-grid {lo:?}..{hi:?} outside dims {:?}",
                self.dims
            )));
        }
        let spec = Self {
            origin: self.origin,
            spacing: self.spacing,
            dims: [0, 1, 2].map(|a| hi[a] - lo[a]),
            offset: [0, 1, 2].map(|a| self.offset[a] + lo[a]),
        };
        spec.validate(budget)?;
        Ok(spec)
    }

    /// World position of the grid's minimum corner.
    pub fn min_corner(&self) -> Vector3<f64> {
        self.origin
            + Vector3::new(self.offset[0] as f64, self.offset[1] as f64, self.offset[2] as f64) * self.spacing
    }

    /// Smallest grid anchored at `volume.min` whose voxels cover `volume`.
    pub fn covering(volume: &Aabb, spacing: f64, budget: u64) -> Result<Self> {
        if !volume.is_valid() {
            return Err(Error::InvalidParameter(format!("empty volume {volume:?}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("voxel spacing {spacing} must be positive")));
        }
        let e = volume.extent();
        let dims = [0, 1, 2].map(|a| ((e[a] / spacing) - 1e-9).ceil().max(1.0) as usize);
        Self::new(volume.min, spacing, dims, budget)
    }

    pub fn validate(&self, budget: u64) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("voxel spacing {} must be positive", self.spacing)));
        }
        if self.dims.contains(&0) {
            return Err(Error::InvalidParameter(format!("grid dims {:?} must be positive", self.dims)));
        }
        let n = self.dims.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d as u64));
        match n {
            Some(n) if n <= budget && n < u32::MAX as u64 => Ok(()),
            Some(n) => Err(Error::VoxelBudget {
                requested: n,
                budget: budget.min(u32::MAX as u64 - 1),
            }),
            None => Err(Error::VoxelBudget {
                requested: u64::MAX,
                budget,
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let r = idx / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        let o = self.offset;
        self.origin
            + Vector3::new(
                (o[0] + i) as f64 + 0.5,
                (o[1] + j) as f64 + 0.5,
                (o[2] + k) as f64 + 0.5,
            ) * self.spacing
    }

    pub fn center_of(&self, idx: usize) -> Vector3<f64> {
        let [i, j, k] = self.coords(idx);
        self.center(i, j, k)
    }

    /// World box spanned by all voxels.
    pub fn bounds(&self) -> Aabb {
        let d = Vector3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64);
        let min = self.min_corner();
        Aabb::new(min, min + d * self.spacing)
    }
}

/// Occupancy grid stored one bit per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub spec: GridSpec,
    words: Vec<u64>,
}

impl VoxelGrid {
    pub fn empty(spec: GridSpec) -> Self {
        Self {
            spec,
            words: vec![0; spec.len().div_ceil(64)],
        }
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut g = Self::empty(spec);
        for idx in 0..spec.len() {
            let [i, j, k] = spec.coords(idx);
            if f(i, j, k) {
                g.set(idx, true);
            }
        }
        g
    }

    pub(crate) fn from_words(spec: GridSpec, words: Vec<u64>) -> Self {
        debug_assert_eq!(words.len(), spec.len().div_ceil(64));
        Self { spec, words }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.spec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.is_empty()
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        (self.words[idx >> 6] >> (idx & 63)) & 1 == 1
    }

    #[inline]
    pub fn get_ijk(&self, i: usize, j: usize, k: usize) -> bool {
        self.get(self.spec.index(i, j, k))
    }

    /// Out-of-range coordinates read as OFF.
    #[inline]
    pub fn get_signed(&self, i: i64, j: i64, k: i64) -> bool {
        let d = self.spec.dims;
        i >= 0
            && j >= 0
            && k >= 0
            && (i as usize) < d[0]
            && (j as usize) < d[1]
            && (k as usize) < d[2]
            && self.get_ijk(i as usize, j as usize, k as usize)
    }

    #[inline]
    pub fn set(&mut self, idx: usize, on: bool) {
        let (w, b) = (idx >> 6, idx & 63);
        if on {
            self.words[w] |= 1 << b;
        } else {
            self.words[w] &= !(1 << b);
        }
    }

    pub fn count_on(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Linear indices of ON voxels in ascending order.
    pub fn iter_on(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + b)
            })
        })
    }
}
