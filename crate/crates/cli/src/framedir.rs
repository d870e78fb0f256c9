//! Frame directory layout read by `reconstruct` and written by `synth`:
//!
//! - `rig.toml`: calibration manifest
//! - `frame_camNNN.png`: the captured frame
//! - `proposal_camNNN.png`: foreground proposal mask
//! - `background_camNNN_KK.png`: object-free frames for the background model
//! - `silhouette_camNNN.png`: optional reference silhouette
//! - `scene.toml`: optional scene description (synthetic data only)

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fvv_core::pipeline::{SceneSpec, SyntheticFrame};
use fvv_core::silhouette::build_background;
use fvv_core::{load_rig, BackgroundModel, CameraRig, Mask};
use image::RgbImage;

pub const RIG_FILE: &str = "rig.toml";
pub const SCENE_FILE: &str = "scene.toml";

pub fn frame_path(dir: &Path, cam: u32) -> PathBuf {
    dir.join(format!("frame_cam{cam:03}.png"))
}

pub fn proposal_path(dir: &Path, cam: u32) -> PathBuf {
    dir.join(format!("proposal_cam{cam:03}.png"))
}

pub fn background_path(dir: &Path, cam: u32, k: usize) -> PathBuf {
    dir.join(format!("background_cam{cam:03}_{k:02}.png"))
}

pub fn silhouette_path(dir: &Path, cam: u32) -> PathBuf {
    dir.join(format!("silhouette_cam{cam:03}.png"))
}

/// Everything `reconstruct` needs for one frame.
pub struct FrameInputs {
    pub rig: CameraRig,
    pub frames: Vec<RgbImage>,
    pub proposals: Vec<Mask>,
    pub backgrounds: Vec<BackgroundModel>,
}

fn load_rgb(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path).with_context(|| format!("reading {}", path.display()))?.into_rgb8())
}

pub fn read_rig(dir: &Path) -> Result<CameraRig> {
    let path = dir.join(RIG_FILE);
    load_rig(&path).with_context(|| format!("loading {}", path.display()))
}

pub fn read_inputs(dir: &Path) -> Result<FrameInputs> {
    let rig = read_rig(dir)?;
    let mut inputs = FrameInputs {
        frames: Vec::new(),
        proposals: Vec::new(),
        backgrounds: Vec::new(),
        rig: rig.clone(),
    };
    for cam in rig.iter() {
        inputs.frames.push(load_rgb(&frame_path(dir, cam.id))?);
        let p = proposal_path(dir, cam.id);
        inputs.proposals.push(Mask::load(&p).with_context(|| format!("reading {}", p.display()))?);
        let mut bg = Vec::new();
        while background_path(dir, cam.id, bg.len()).is_file() {
            bg.push(load_rgb(&background_path(dir, cam.id, bg.len()))?);
        }
        if bg.len() < 2 {
            bail!("camera {}: need at least 2 background frames, found {}", cam.id, bg.len());
        }
        inputs.backgrounds.push(build_background(&bg).with_context(|| format!("camera {} background", cam.id))?);
    }
    Ok(inputs)
}

pub fn read_silhouettes(dir: &Path, rig: &CameraRig) -> Result<Vec<Mask>> {
    rig.iter()
        .map(|cam| {
            let p = silhouette_path(dir, cam.id);
            Mask::load(&p).with_context(|| format!("reading {}", p.display()))
        })
        .collect()
}

/// Writes a synthetic frame, regenerating the background frames it was built from.
pub fn write_synthetic(dir: &Path, spec: &SceneSpec, scene: &SyntheticFrame) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    scene.rig.save(&dir.join(RIG_FILE))?;
    std::fs::write(dir.join(SCENE_FILE), toml::to_string(spec)?)?;
    for (k, cam) in scene.rig.iter().enumerate() {
        scene.frames[k].save(frame_path(dir, cam.id))?;
        scene.proposals[k].save(&proposal_path(dir, cam.id))?;
        scene.silhouettes[k].save(&silhouette_path(dir, cam.id))?;
        for (f, img) in fvv_core::pipeline::background_frames(spec, cam).iter().enumerate() {
            img.save(background_path(dir, cam.id, f))?;
        }
    }
    Ok(())
}
