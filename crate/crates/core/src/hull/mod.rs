//! Coarse-to-fine volumetric visual hull: carving, component labeling,
//! size filtering, ROI extraction and dense per-ROI carving.

mod carve;
mod cull;
mod ccl;
mod grid;
mod rle;
mod roi;

pub use carve::{carve, carve_with_stats, CarveStats};
pub use ccl::{label_components, Component, Labeling};
pub use grid::{GridSpec, VoxelGrid, DEFAULT_VOXEL_BUDGET};
pub use rle::{read_rle, write_rle, RLE_MAGIC};
pub use roi::{dense_carve, dense_carve_with_stats, extract_rois, filter_noise, isolate_component, roi_grid_spec, NoiseFilterParams, Roi};

pub(crate) use carve::check_silhouettes;
