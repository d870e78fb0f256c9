mod common;

use common::*;
use fvv_core::hull::*;
use fvv_core::pipeline::{render_analytic, SceneSpec};
use fvv_core::{Aabb, CameraModel, CameraRig, Mask};
use nalgebra::Vector3;
use proptest::prelude::*;

fn small_rig() -> CameraRig {
    let cams = (0..5)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 5.0;
            let eye = Vector3::new(3000.0 * a.cos(), 3000.0 * a.sin(), 800.0 + 200.0 * k as f64);
            CameraModel::look_at(k, 64, 48, 60.0, eye, Vector3::new(0.0, 0.0, 300.0))
        })
        .collect();
    CameraRig::new(cams).unwrap()
}

fn seen_by(rig: &CameraRig, p: &Vector3<f64>) -> usize {
    rig.iter().filter(|c| c.project(p).in_frustum).count()
}

#[test]
fn full_foreground_keeps_every_sufficiently_seen_voxel() {
    let rig = small_rig();
    let sils: Vec<Mask> = rig.iter().map(|c| Mask::filled(c.width, c.height, true)).collect();
    let spec = GridSpec::new(Vector3::new(-4000.0, -4000.0, -1000.0), 250.0, [32, 32, 12], u64::MAX).unwrap();
    for min_views in [1, 3, 5] {
        let g = carve(&rig, &sils, &spec, min_views).unwrap();
        for idx in 0..spec.len() {
            assert_eq!(g.get(idx), seen_by(&rig, &spec.center_of(idx)) >= min_views, "voxel {idx}");
        }
    }
}

#[test]
fn one_empty_silhouette_clears_everything_it_sees() {
    let rig = small_rig();
    let mut sils: Vec<Mask> = rig.iter().map(|c| Mask::filled(c.width, c.height, true)).collect();
    sils[2] = Mask::filled(64, 48, false);
    let spec = GridSpec::new(Vector3::new(-500.0, -500.0, 0.0), 50.0, [20, 20, 12], u64::MAX).unwrap();
    assert!((0..spec.len()).all(|i| rig.get(2).project(&spec.center_of(i)).in_frustum));
    let g = carve(&rig, &sils, &spec, 1).unwrap();
    assert_eq!(g.count_on(), 0);
}

#[test]
fn sphere_hull_contains_the_sphere_and_stays_inside_the_cones() {
    let spec = small_sphere_spec();
    let (centre, r) = sphere_of(&spec.objects[0]);
    let rig = spec.rig.build().unwrap();
    let sils = sphere_silhouettes(&rig, &[(centre, r)]);
    let stage = Aabb::new(Vector3::new(-1300.0, -1300.0, -300.0), Vector3::new(1300.0, 1300.0, 2300.0));
    let gs = GridSpec::covering(&stage, 50.0, u64::MAX).unwrap();
    let g = carve(&rig, &sils, &gs, 3).unwrap();
    // Nearest-pixel sampling can push a centre up to half a pixel diagonal
    // outside the disk; shrink the sphere by that footprint at the far side.
    let far = rig.iter().map(|c| (c.center() - centre).norm() + r).fold(0.0, f64::max);
    let footprint = far * std::f64::consts::FRAC_1_SQRT_2 / spec.rig.focal;
    let mut inside = 0;
    for idx in 0..gs.len() {
        let p = gs.center_of(idx);
        if (p - centre).norm() <= r - footprint {
            inside += 1;
            assert!(g.get(idx), "interior voxel {idx} carved away");
        }
        if g.get(idx) {
            // Oracle: the nearest pixel of every seeing camera lies in the projected disk.
            let mut seen = 0;
            for cam in rig.iter() {
                let pr = cam.project(&p);
                if !pr.in_frustum {
                    continue;
                }
                seen += 1;
                let (u, v) = pr.nearest_pixel();
                assert!(in_projected_sphere(cam, &centre, r, u as f64, v as f64), "voxel {idx} camera {}", cam.id);
            }
            assert!(seen >= 3);
        }
    }
    assert!(inside > 30_000);
    assert!(g.count_on() >= inside);
}

#[test]
fn two_sphere_rois_contain_their_spheres() {
    let spec = SceneSpec::two_spheres();
    let rig = spec.rig.build().unwrap();
    let spheres: Vec<_> = spec.objects.iter().map(sphere_of).collect();
    let sils = sphere_silhouettes(&rig, &spheres);
    let stage = Aabb::new(Vector3::new(-3500.0, -3500.0, 0.0), Vector3::new(3500.0, 3500.0, 2500.0));
    let gs = GridSpec::covering(&stage, 50.0, u64::MAX).unwrap();
    let g = carve(&rig, &sils, &gs, 3).unwrap();
    let lab = label_components(&g, [32, 32, 32]);
    let (_, lab) = filter_noise(&g, &lab, &NoiseFilterParams::new(4, u64::MAX).unwrap());
    let rois = extract_rois(&lab, &gs, 50.0);
    assert_eq!(rois.len(), 2);
    for (c, r) in &spheres {
        let b = fvv_core::pipeline::Shape::Sphere { center: *c, radius: *r }.bounds();
        assert_eq!(
            rois.iter().filter(|roi| roi.bounds.contains(&b.min) && roi.bounds.contains(&b.max)).count(),
            1
        );
    }
}

#[test]
fn roi_carve_matches_full_volume_carve() {
    let (rig, _, sils) = render_analytic(&SceneSpec::two_spheres()).unwrap();
    let stage = Aabb::new(Vector3::new(-3500.0, -3500.0, 0.0), Vector3::new(3500.0, 3500.0, 2500.0));
    let coarse_spec = GridSpec::covering(&stage, 50.0, u64::MAX).unwrap();
    let coarse = carve(&rig, &sils, &coarse_spec, 3).unwrap();
    let lab = label_components(&coarse, [32, 32, 32]);
    let rois = extract_rois(&lab, &coarse_spec, 50.0);
    let lattice = GridSpec::covering(&stage, 20.0, u64::MAX).unwrap();
    let full = carve(&rig, &sils, &lattice, 3).unwrap();
    let dense = dense_carve(&rig, &sils, &rois, &lattice, 3, u64::MAX).unwrap();

    let global = |g: &VoxelGrid, idx: usize| {
        let [i, j, k] = g.spec.coords(idx);
        let o = g.spec.offset;
        lattice.index(o[0] + i, o[1] + j, o[2] + k)
    };
    let mut covered = vec![false; lattice.len()];
    for g in &dense {
        for idx in 0..g.len() {
            let gi = global(g, idx);
            covered[gi] = true;
            assert_eq!(g.get(idx), full.get(gi), "lattice voxel {gi}");
        }
    }
    assert!(full.iter_on().all(|i| covered[i]), "ON voxel outside every ROI");
    assert!(full.count_on() > 0);
}

#[test]
fn labeling_matches_bfs_for_every_block_shape() {
    for (seed, density) in [(1, 0.05), (2, 0.2), (3, 0.5)] {
        let g = random_grid([24, 20, 16], density, seed);
        let oracle = canonical(&bfs_labels(&g));
        for block in [[1, 1, 1], [3, 5, 2], [8, 8, 8], [24, 20, 16], [32, 32, 32]] {
            let lab = label_components(&g, block);
            assert_eq!(canonical(&lab.labels), oracle, "density {density} block {block:?}");
        }
    }
}

#[test]
fn size_band_matches_bfs_sizes() {
    let g = random_grid([20, 20, 20], 0.12, 9);
    let oracle = bfs_labels(&g);
    let mut sizes = std::collections::HashMap::new();
    for &l in oracle.iter().filter(|&&l| l > 0) {
        *sizes.entry(l).or_insert(0u64) += 1;
    }
    let params = NoiseFilterParams::new(5, 500).unwrap();
    let lab = label_components(&g, [8, 8, 8]);
    let (kept, _) = filter_noise(&g, &lab, &params);
    for idx in 0..g.len() {
        let keep = oracle[idx] > 0 && (5..=500).contains(&sizes[&oracle[idx]]);
        assert_eq!(kept.get(idx), keep, "voxel {idx}");
    }
}

fn mask_strategy(w: u32, h: u32) -> impl Strategy<Value = Mask> {
    prop::collection::vec(prop::bool::weighted(0.7), (w * h) as usize).prop_map(move |b| Mask::from_bits(w, h, b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shrinking_a_silhouette_never_adds_voxels(
        masks in prop::collection::vec(mask_strategy(64, 48), 5),
        which in 0usize..5,
        drop in prop::collection::vec(any::<prop::sample::Index>(), 1..200),
    ) {
        let rig = small_rig();
        let spec = GridSpec::new(Vector3::new(-1000.0, -1000.0, -200.0), 100.0, [20, 20, 12], u64::MAX).unwrap();
        let before = carve(&rig, &masks, &spec, 2).unwrap();
        let mut shrunk = masks.clone();
        for d in drop {
            let i = d.index(64 * 48);
            shrunk[which].set((i % 64) as u32, (i / 64) as u32, false);
        }
        let after = carve(&rig, &shrunk, &spec, 2).unwrap();
        for idx in after.iter_on() {
            prop_assert!(before.get(idx));
        }
    }

    #[test]
    fn filtering_never_touches_survivors(seed in any::<u64>(), density in 0.02f64..0.3, lo in 0u64..20, span in 0u64..400) {
        let g = random_grid([16, 16, 16], density, seed);
        let lab = label_components(&g, [8, 8, 8]);
        let (kept, kept_lab) = filter_noise(&g, &lab, &NoiseFilterParams::new(lo, lo + span).unwrap());
        for c in &lab.components {
            let survives = kept_lab.component(c.id) == Some(c);
            prop_assert_eq!(survives, (lo..=lo + span).contains(&c.voxel_count));
            for idx in (0..g.len()).filter(|&i| lab.labels[i] == c.id) {
                prop_assert_eq!(kept.get(idx), survives);
            }
        }
        prop_assert!(kept.iter_on().all(|i| lab.labels[i] != 0));
    }
}
