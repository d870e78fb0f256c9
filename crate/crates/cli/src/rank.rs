//! Pose-to-ranking fixture shared with the viewer.

use fvv_core::render::{rank_cameras, OrbitPose, VirtualCamera};
use fvv_core::CameraRig;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub const FIXTURE_FORMAT: &str = "fvv-rank-fixture";
pub const FIXTURE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureCamera {
    pub id: u32,
    pub center: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixturePose {
    pub index: usize,
    pub target: [f64; 3],
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub radius: f64,
    pub eye: [f64; 3],
    /// Camera ids, nearest first.
    pub ranking: Vec<u32>,
    pub active: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankFixture {
    pub format: String,
    pub version: u32,
    pub cameras: Vec<FixtureCamera>,
    pub poses: Vec<FixturePose>,
}

/// `count` orbit poses at evenly spaced azimuths starting from 0°.
pub fn orbit_fixture(rig: &CameraRig, count: usize, target: Vector3<f64>, radius: f64, elevation_deg: f64) -> RankFixture {
    // The viewer's own orbit camera has no intrinsics that matter for ranking.
    let poses = (0..count)
        .map(|k| {
            let pose = OrbitPose {
                target,
                azimuth_deg: 360.0 * k as f64 / count as f64,
                elevation_deg,
                radius,
            };
            let v = VirtualCamera::from_orbit(&pose, 64, 64, 64.0).expect("orbit pose is a valid camera");
            let ranking = rank_cameras(&v, rig);
            FixturePose {
                index: k,
                target: target.into(),
                azimuth_deg: pose.azimuth_deg,
                elevation_deg,
                radius,
                eye: v.center().into(),
                active: ranking[0],
                ranking,
            }
        })
        .collect();
    RankFixture {
        format: FIXTURE_FORMAT.into(),
        version: FIXTURE_VERSION,
        cameras: rig
            .iter()
            .map(|c| FixtureCamera {
                id: c.id,
                center: c.center().into(),
            })
            .collect(),
        poses,
    }
}
