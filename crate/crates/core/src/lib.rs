//! Multi-camera free-viewpoint reconstruction: calibration, silhouettes,
//! coarse-to-fine visual hulls, exact-isovalue marching cubes, per-camera
//! visibility and view-dependent texturing.

// `!(x < y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod error;
pub mod geom;
pub mod hull;
pub mod mesh;
pub mod pipeline;
pub mod render;
pub mod silhouette;
pub mod visibility;

pub use calib::{load_rig, CameraModel, CameraRig, Projection};
pub use error::{Error, Result, Stage};
pub use geom::Aabb;
pub use hull::{GridSpec, VoxelGrid};
pub use mesh::{IsoMode, TriangleMesh};
pub use silhouette::{AdaptiveParams, BackgroundModel, DistanceMap, Mask};
pub use pipeline::{run_frame, PipelineConfig, SceneBundle, StageTimings};
pub use render::{rank_cameras, render_view, RenderedImage, VirtualCamera};
pub use visibility::{DepthImage, VisibilityMap};
