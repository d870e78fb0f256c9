//! Inputs shared by the benchmarks: the sweep scene and one reconstruction of it.

use fvv_core::hull::GridSpec;
use fvv_core::pipeline::{generate_synthetic_scene, reconstruct, FrameOutput, SceneSpec, SyntheticFrame};
use fvv_core::{PipelineConfig, Result, TriangleMesh};

pub struct Fixture {
    pub cfg: PipelineConfig,
    pub scene: SyntheticFrame,
    pub output: FrameOutput,
}

impl Fixture {
    pub fn sweep() -> Result<Self> {
        let cfg = PipelineConfig {
            stage: SceneSpec::sweep_stage(),
            ..PipelineConfig::default()
        };
        let scene = generate_synthetic_scene(&SceneSpec::sweep_scene())?;
        let output = reconstruct(&cfg, &scene.rig, 0, &scene.frames, scene.silhouettes.clone())?;
        Ok(Self { cfg, scene, output })
    }

    pub fn coarse_spec(&self) -> Result<GridSpec> {
        GridSpec::covering(&self.cfg.stage, self.cfg.coarse_spacing, self.cfg.voxel_budget)
    }

    pub fn fine_lattice(&self) -> Result<GridSpec> {
        GridSpec::covering(&self.cfg.stage, self.cfg.fine_spacing, u64::MAX)
    }

    pub fn scene_mesh(&self) -> TriangleMesh {
        self.output.bundle.scene_mesh()
    }
}
