mod common;

use common::*;
use fvv_core::hull::{carve, GridSpec};
use fvv_core::mesh::{polygonize, IsoMode};
use fvv_core::pipeline::{render_analytic, SceneSpec};
use fvv_core::render::{rank_cameras, rank_from_point, render_view, OrbitPose, VirtualCamera, FALLBACK_COLOR};
use fvv_core::visibility::{compute_visibility, rasterize, NO_TRIANGLE};
use fvv_core::{Aabb, CameraModel, CameraRig, Mask};
use nalgebra::Vector3;
use proptest::prelude::*;

#[test]
fn rendering_from_an_input_pose_reproduces_its_frame() {
    let spec = small_sphere_spec();
    let (rig, frames, sils) = render_analytic(&spec).unwrap();
    let stage = Aabb::new(Vector3::new(-1300.0, -1300.0, -300.0), Vector3::new(1300.0, 1300.0, 2300.0));
    let gs = GridSpec::covering(&stage, 20.0, u64::MAX).unwrap();
    let grid = carve(&rig, &sils, &gs, 3).unwrap();
    let (mesh, _) = polygonize(&grid, &rig, &sils, IsoMode::Exact, 1).unwrap();
    let (_, vis) = compute_visibility(&mesh, &rig, 60.0);
    for k in [0, 5] {
        let cam = rig.get(k);
        let v = VirtualCamera::from_camera(cam).unwrap();
        let img = render_view(&mesh, &rig, &frames, &vis, &v, FALLBACK_COLOR).unwrap();
        let interior: Mask = sils[k].eroded(3);
        let (mut sum, mut n) = (0.0, 0usize);
        for (x, y, px) in img.color.enumerate_pixels() {
            if !interior.get(x, y) {
                continue;
            }
            let want = frames[k].get_pixel(x, y);
            sum += (0..3).map(|c| (px[c] as f64 - want[c] as f64).abs()).sum::<f64>() / 3.0;
            n += 1;
        }
        let mae = sum / n as f64 / 255.0;
        assert!(n > 20_000);
        assert!(mae <= 5.0 / 255.0, "camera {k}: mean abs error {:.3}/255", mae * 255.0);
    }
}

#[test]
fn every_pixel_sources_from_the_first_ranked_visible_camera() {
    let spec = SceneSpec::two_spheres();
    let (rig, frames, sils) = render_analytic(&spec).unwrap();
    let stage = Aabb::new(Vector3::new(-3500.0, -3500.0, 0.0), Vector3::new(3500.0, 3500.0, 2500.0));
    let gs = GridSpec::covering(&stage, 40.0, u64::MAX).unwrap();
    let grid = carve(&rig, &sils, &gs, 3).unwrap();
    let (mesh, _) = polygonize(&grid, &rig, &sils, IsoMode::Exact, 1).unwrap();
    let (_, vis) = compute_visibility(&mesh, &rig, 120.0);

    // A viewpoint on the x axis sees one sphere behind the other.
    let pose = OrbitPose {
        target: Vector3::new(0.0, 0.0, 600.0),
        azimuth_deg: 3.0,
        elevation_deg: 8.0,
        radius: 6500.0,
    };
    let v = VirtualCamera::from_orbit(&pose, 480, 270, 450.0).unwrap();
    let img = render_view(&mesh, &rig, &frames, &vis, &v, FALLBACK_COLOR).unwrap();
    let ranking = rank_cameras(&v, &rig);
    let raster = rasterize(&mesh, v.model());
    let (mut second_or_later, mut covered) = (0, 0);
    for (i, &t) in raster.triangle.iter().enumerate() {
        let (x, y) = (i as u32 % 480, i as u32 / 480);
        if t == NO_TRIANGLE {
            assert_eq!(img.source_at(x, y), None);
            continue;
        }
        covered += 1;
        let expected = ranking.iter().copied().find(|&id| vis.is_visible(id, t as usize));
        assert_eq!(img.source_at(x, y), expected, "pixel ({x},{y})");
        if expected.is_some() && expected != Some(ranking[0]) {
            second_or_later += 1;
        }
    }
    assert!(covered > 1000);
    assert!(second_or_later > 0, "fixture never exercises the fallback to lower-ranked cameras");
}

fn ring(n: usize, radius: f64) -> CameraRig {
    let cams = (0..n)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / n as f64;
            let eye = Vector3::new(radius * a.cos(), radius * a.sin(), 2000.0);
            CameraModel::look_at(k as u32, 64, 48, 50.0, eye, Vector3::zeros())
        })
        .collect();
    CameraRig::new(cams).unwrap()
}

proptest! {
    #[test]
    fn moving_toward_a_camera_makes_it_first(j in 0usize..10, t in 0.51f64..1.0, start in (-5000.0f64..5000.0, -5000.0f64..5000.0, 0.0f64..4000.0)) {
        let rig = ring(10, 6000.0);
        let from = Vector3::new(start.0, start.1, start.2);
        let c = rig.get(j).center();
        let p = from + (c - from) * t;
        // Only meaningful when p is strictly closer to camera j than to any other.
        let dj = (p - c).norm();
        prop_assume!(rig.iter().filter(|o| o.id != j as u32).all(|o| (o.center() - p).norm() > dj));
        prop_assert_eq!(rank_from_point(&p, &rig)[0], j as u32);
    }

    #[test]
    fn ranking_is_a_sorted_distance_order(p in (-8000.0f64..8000.0, -8000.0f64..8000.0, -1000.0f64..5000.0)) {
        let rig = ring(10, 6000.0);
        let p = Vector3::new(p.0, p.1, p.2);
        let ids = rank_from_point(&p, &rig);
        let mut want: Vec<(f64, u32)> = rig.iter().map(|c| ((c.center() - p).norm(), c.id)).collect();
        want.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        prop_assert_eq!(ids, want.into_iter().map(|w| w.1).collect::<Vec<_>>());
    }
}
