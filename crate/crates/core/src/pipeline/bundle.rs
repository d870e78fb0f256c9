//! On-disk scene bundle: a directory holding
//!
//! - `manifest.toml`: schema version, frame id, file references, statistics
//! - `rig.toml`: calibration manifest
//! - `object_NNN.ply`: one mesh per object; the scene mesh is their
//!   concatenation in manifest order
//! - `texture_camNNN.png`: the frame each camera captured
//! - `visibility_camNNN.bin`: `VIS1`, camera id (u32 LE), triangle count
//!   (u32 LE), then one byte per scene-mesh triangle, 1 = visible
//! - `timings.toml`: per-stage wall-clock times, the only nondeterministic file

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use image::RgbImage;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::StageTimings;
use crate::calib::CameraRig;
use crate::error::{Error, Result};
use crate::geom::Aabb;
use crate::mesh::{read_ply, write_ply, TriangleMesh};
use crate::visibility::VisibilityMap;

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const RIG_FILE: &str = "rig.toml";
pub const TIMINGS_FILE: &str = "timings.toml";
pub const VISIBILITY_MAGIC: &[u8; 4] = b"VIS1";

/// Counters from one reconstruction; all deterministic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameStats {
    pub coarse_voxels_tested: u64,
    pub coarse_voxels_occupied: u64,
    pub components_found: u64,
    pub components_kept: u64,
    pub fine_voxels_tested: u64,
    pub fine_voxels_occupied: u64,
    pub vertices: u64,
    pub triangles: u64,
    pub fallback_edges: u64,
    pub inconsistent_edges: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleObject {
    /// Component id; also the `object_id` of every face in `mesh`.
    pub id: u32,
    pub mesh: TriangleMesh,
    /// Occupied fine voxels.
    pub voxel_count: u64,
    /// Region the object was carved in.
    pub bounds: Aabb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub frame_id: u64,
    pub rig: CameraRig,
    pub objects: Vec<BundleObject>,
    /// One texture per camera, in rig order.
    pub textures: Vec<RgbImage>,
    /// Per-camera flags over the scene mesh.
    pub visibility: VisibilityMap,
    pub stats: FrameStats,
    pub timings: Option<StageTimings>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    schema_version: u32,
    frame_id: u64,
    rig: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timings: Option<String>,
    stats: FrameStats,
    #[serde(default)]
    object: Vec<ObjectEntry>,
    #[serde(default)]
    camera: Vec<CameraEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectEntry {
    id: u32,
    mesh: String,
    vertices: u64,
    triangles: u64,
    voxels: u64,
    bounds_min: [f64; 3],
    bounds_max: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraEntry {
    id: u32,
    texture: String,
    visibility: String,
}

fn bundle_err(m: impl Into<String>) -> Error {
    Error::Bundle(m.into())
}

impl SceneBundle {
    /// All object meshes concatenated in order.
    pub fn scene_mesh(&self) -> TriangleMesh {
        TriangleMesh::merge(self.objects.iter().map(|o| &o.mesh))
    }

    pub fn triangle_count(&self) -> usize {
        self.objects.iter().map(|o| o.mesh.triangle_count()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.triangle_count();
        if self.textures.len() != self.rig.len() {
            return Err(bundle_err(format!("{} textures for {} cameras", self.textures.len(), self.rig.len())));
        }
        for (c, t) in self.rig.iter().zip(&self.textures) {
            if t.dimensions() != (c.width, c.height) {
                return Err(bundle_err(format!("camera {}: texture size {:?}", c.id, t.dimensions())));
            }
        }
        let ids: Vec<u32> = self.rig.iter().map(|c| c.id).collect();
        if self.visibility.camera_ids != ids || self.visibility.flags.iter().any(|f| f.len() != n) {
            return Err(bundle_err("visibility does not match rig and scene mesh"));
        }
        for o in &self.objects {
            o.mesh.validate()?;
            if o.mesh.object_ids.iter().any(|&id| id != o.id) {
                return Err(bundle_err(format!("object {} has faces with another id", o.id)));
            }
        }
        if self.objects.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(bundle_err("object ids must be strictly increasing"));
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.validate()?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = Manifest {
            schema_version: BUNDLE_SCHEMA_VERSION,
            frame_id: self.frame_id,
            rig: RIG_FILE.into(),
            timings: self.timings.map(|_| TIMINGS_FILE.into()),
            stats: self.stats,
            object: Vec::new(),
            camera: Vec::new(),
        };
        self.rig.save(&dir.join(RIG_FILE))?;
        for o in &self.objects {
            let name = format!("object_{:03}.ply", o.id);
            let path = dir.join(&name);
            let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_ply(&o.mesh, BufWriter::new(f)).map_err(|e| Error::io(&path, e))?;
            manifest.object.push(ObjectEntry {
                id: o.id,
                mesh: name,
                vertices: o.mesh.vertices.len() as u64,
                triangles: o.mesh.triangle_count() as u64,
                voxels: o.voxel_count,
                bounds_min: o.bounds.min.into(),
                bounds_max: o.bounds.max.into(),
            });
        }
        for ((cam, tex), flags) in self.rig.iter().zip(&self.textures).zip(&self.visibility.flags) {
            let texture = format!("texture_cam{:03}.png", cam.id);
            let path = dir.join(&texture);
            tex.save(&path).map_err(|source| Error::Image { path, source })?;
            let visibility = format!("visibility_cam{:03}.bin", cam.id);
            let path = dir.join(&visibility);
            fs::write(&path, encode_visibility(cam.id, flags)).map_err(|e| Error::io(&path, e))?;
            manifest.camera.push(CameraEntry {
                id: cam.id,
                texture,
                visibility,
            });
        }
        if let Some(t) = &self.timings {
            let path = dir.join(TIMINGS_FILE);
            fs::write(&path, toml::to_string(t).expect("timings serialize")).map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, toml::to_string(&manifest).expect("manifest serializes")).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Parse {
            what: "bundle manifest".into(),
            message: e.to_string(),
        })?;
        if m.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(bundle_err(format!(
                "unsupported schema_version {} (expected {BUNDLE_SCHEMA_VERSION})",
                m.schema_version
            )));
        }
        let existing = |name: &str| {
            let p = dir.join(name);
            if p.is_file() {
                Ok(p)
            } else {
                Err(bundle_err(format!("referenced file {name} is missing")))
            }
        };
        let rig = crate::calib::load_rig(&existing(&m.rig)?)?;
        let mut objects = Vec::with_capacity(m.object.len());
        for o in &m.object {
            let path = existing(&o.mesh)?;
            let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            let mesh = read_ply(std::io::BufReader::new(f))?;
            if mesh.vertices.len() as u64 != o.vertices || mesh.triangle_count() as u64 != o.triangles {
                return Err(bundle_err(format!("{} does not match its manifest entry", o.mesh)));
            }
            objects.push(BundleObject {
                id: o.id,
                mesh,
                voxel_count: o.voxels,
                bounds: Aabb::new(Vector3::from(o.bounds_min), Vector3::from(o.bounds_max)),
            });
        }
        if m.camera.iter().map(|c| c.id).ne(rig.iter().map(|c| c.id)) {
            return Err(bundle_err("camera entries do not match the rig"));
        }
        let mut textures = Vec::new();
        let mut visibility = VisibilityMap {
            camera_ids: Vec::new(),
            flags: Vec::new(),
        };
        for c in &m.camera {
            let path = existing(&c.texture)?;
            let img = image::open(&path).map_err(|source| Error::Image { path, source })?;
            textures.push(img.into_rgb8());
            let path = existing(&c.visibility)?;
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let (id, flags) = decode_visibility(&bytes)?;
            if id != c.id {
                return Err(bundle_err(format!("{} holds camera {id}", c.visibility)));
            }
            visibility.camera_ids.push(id);
            visibility.flags.push(flags);
        }
        let timings = match &m.timings {
            Some(name) => {
                let path = existing(name)?;
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                Some(toml::from_str(&text).map_err(|e| Error::Parse {
                    what: "timings".into(),
                    message: e.to_string(),
                })?)
            }
            None => None,
        };
        let bundle = SceneBundle {
            frame_id: m.frame_id,
            rig,
            objects,
            textures,
            visibility,
            stats: m.stats,
            timings,
        };
        bundle.validate()?;
        Ok(bundle)
    }
}

pub fn encode_visibility(camera_id: u32, flags: &[bool]) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + flags.len());
    out.extend_from_slice(VISIBILITY_MAGIC);
    out.extend_from_slice(&camera_id.to_le_bytes());
    out.extend_from_slice(&(flags.len() as u32).to_le_bytes());
    out.extend(flags.iter().map(|&v| v as u8));
    out
}

pub fn decode_visibility(bytes: &[u8]) -> Result<(u32, Vec<bool>)> {
    if bytes.len() < 12 || &bytes[..4] != VISIBILITY_MAGIC {
        return Err(bundle_err("visibility file lacks VIS1 header"));
    }
    let id = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() != 12 + n {
        return Err(bundle_err(format!("visibility file for camera {id} has wrong length")));
    }
    let flags = bytes[12..]
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(bundle_err(format!("visibility byte {b} is not 0 or 1"))),
        })
        .collect::<Result<_>>()?;
    Ok((id, flags))
}
