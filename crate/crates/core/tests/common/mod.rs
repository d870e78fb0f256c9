//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::collections::VecDeque;

use fvv_core::hull::{GridSpec, VoxelGrid};
use fvv_core::pipeline::{RigSpec, SceneObject, SceneSpec, Shape};
use fvv_core::{CameraModel, Mask, TriangleMesh};
use nalgebra::{Vector2, Vector3};

/// Möller–Trumbore ray/triangle test; returns the ray parameter of the hit.
pub fn ray_triangle(o: &Vector3<f64>, d: &Vector3<f64>, v: [Vector3<f64>; 3]) -> Option<f64> {
    let e1 = v[1] - v[0];
    let e2 = v[2] - v[0];
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - v[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let w = d.dot(&q) * inv;
    if w < 0.0 || u + w > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 0.0).then_some(t)
}

/// World-space ray through a pixel of a distortion-free camera, from the
/// intrinsics and pose directly.
pub fn pixel_ray(cam: &CameraModel, x: f64, y: f64) -> (Vector3<f64>, Vector3<f64>) {
    let yn = (y - cam.cy) / cam.fy;
    let xn = (x - cam.cx) / cam.fx - cam.skew * yn;
    let rt = cam.rotation.transpose();
    let origin = -(rt * cam.translation);
    (origin, rt * Vector3::new(xn, yn, 1.0))
}

/// Camera-space depth of the nearest mesh hit along the pixel-centre ray, with its triangle.
pub fn raycast_depth(mesh: &TriangleMesh, cam: &CameraModel, x: f64, y: f64) -> Option<(f64, usize)> {
    let (o, d) = pixel_ray(cam, x, y);
    let mut best: Option<(f64, usize)> = None;
    for t in 0..mesh.triangle_count() {
        if let Some(s) = ray_triangle(&o, &d, mesh.corners(t)) {
            if best.is_none_or(|(b, _)| s < b) {
                best = Some((s, t));
            }
        }
    }
    // Direction has unit camera-space z, so the ray parameter is the depth.
    best
}

/// Triangles binned by their projected bounding box in fixed-size pixel
/// tiles, so a pixel ray only tests triangles that can cover it.
pub struct RayBins {
    tile: f64,
    cols: usize,
    rows: usize,
    bins: Vec<Vec<usize>>,
    /// Triangles straddling the camera plane; tested by every ray.
    always: Vec<usize>,
}

impl RayBins {
    pub fn new(mesh: &TriangleMesh, cam: &CameraModel, tile: u32) -> Self {
        let cols = cam.width.div_ceil(tile) as usize + 2;
        let rows = cam.height.div_ceil(tile) as usize + 2;
        let tile = tile as f64;
        let mut bins = vec![Vec::new(); cols * rows];
        let mut always = Vec::new();
        let cell = |v: f64, n: usize| (((v + 0.5) / tile).floor() + 1.0).clamp(0.0, n as f64 - 1.0) as usize;
        for t in 0..mesh.triangle_count() {
            let c = mesh.corners(t).map(|v| cam.rotation * v + cam.translation);
            if c.iter().all(|p| p.z <= 0.0) {
                continue;
            }
            if c.iter().any(|p| p.z <= 1e-9) {
                always.push(t);
                continue;
            }
            let px = c.map(|p| (cam.fx * p.x / p.z + cam.skew * cam.fx * p.y / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy));
            let (x0, x1) = px.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
            let (y0, y1) = px.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
            let slack = 1e-6 * (1.0 + x1.abs().max(y1.abs()).max(x0.abs()).max(y0.abs()));
            for r in cell(y0 - slack, rows)..=cell(y1 + slack, rows) {
                for q in cell(x0 - slack, cols)..=cell(x1 + slack, cols) {
                    bins[r * cols + q].push(t);
                }
            }
        }
        RayBins { tile, cols, rows, bins, always }
    }

    /// Candidate triangles for the ray through pixel coordinate (x, y).
    pub fn candidates(&self, x: f64, y: f64) -> impl Iterator<Item = usize> + '_ {
        let c = |v: f64, n: usize| (((v + 0.5) / self.tile).floor() + 1.0).clamp(0.0, n as f64 - 1.0) as usize;
        let b = &self.bins[c(y, self.rows) * self.cols + c(x, self.cols)];
        b.iter().chain(&self.always).copied()
    }

    /// Ray parameter (camera depth) of the nearest hit through (x, y).
    pub fn first_hit(&self, mesh: &TriangleMesh, cam: &CameraModel, x: f64, y: f64) -> Option<(f64, usize)> {
        let (o, d) = pixel_ray(cam, x, y);
        let mut best: Option<(f64, usize)> = None;
        for t in self.candidates(x, y) {
            if let Some(s) = ray_triangle(&o, &d, mesh.corners(t)) {
                if best.is_none_or(|(b, bt)| s < b || (s == b && t < bt)) {
                    best = Some((s, t));
                }
            }
        }
        best
    }
}

/// Per-voxel component id (0 = off), numbered by smallest voxel index, via BFS
/// over the 26-neighbourhood.
pub fn bfs_labels(grid: &VoxelGrid) -> Vec<u32> {
    let [nx, ny, nz] = grid.spec.dims;
    let mut labels = vec![0u32; grid.len()];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for seed in 0..grid.len() {
        if !grid.get(seed) || labels[seed] != 0 {
            continue;
        }
        next += 1;
        labels[seed] = next;
        queue.push_back(seed);
        while let Some(v) = queue.pop_front() {
            let [i, j, k] = grid.spec.coords(v);
            for dk in -1i64..=1 {
                for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let (a, b, c) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                        if a < 0 || b < 0 || c < 0 || a >= nx as i64 || b >= ny as i64 || c >= nz as i64 {
                            continue;
                        }
                        let n = grid.spec.index(a as usize, b as usize, c as usize);
                        if grid.get(n) && labels[n] == 0 {
                            labels[n] = next;
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
    }
    labels
}

/// Renumbers labels so components are numbered by first appearance.
pub fn canonical(labels: &[u32]) -> Vec<u32> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            if l == 0 {
                0
            } else {
                let n = map.len() as u32 + 1;
                *map.entry(l).or_insert(n)
            }
        })
        .collect()
}

pub fn random_grid(dims: [usize; 3], density: f64, seed: u64) -> VoxelGrid {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let spec = GridSpec::new(Vector3::zeros(), 1.0, dims, u64::MAX).unwrap();
    VoxelGrid::from_fn(spec, |_, _, _| rng.gen_bool(density))
}

/// True when the ray through image point `(u, v)` of a distortion-free camera
/// meets the sphere: a point-in-projected-conic test done in camera space.
pub fn in_projected_sphere(cam: &CameraModel, centre: &Vector3<f64>, r: f64, u: f64, v: f64) -> bool {
    let c = cam.rotation * centre + cam.translation;
    let yn = (v - cam.cy) / cam.fy;
    let d = Vector3::new((u - cam.cx) / cam.fx - cam.skew * yn, yn, 1.0);
    let dc = d.dot(&c);
    dc > 0.0 && dc * dc >= (c.norm_squared() - r * r) * d.norm_squared()
}

/// Fraction along the image segment `a → b` at which it leaves the projected
/// sphere, from the closed-form line–conic intersection. 0 when `a` is
/// outside, 1 when `b` is inside.
pub fn line_conic_exit(cam: &CameraModel, centre: &Vector3<f64>, r: f64, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    if !in_projected_sphere(cam, centre, r, a.x, a.y) {
        return 0.0;
    }
    if in_projected_sphere(cam, centre, r, b.x, b.y) {
        return 1.0;
    }
    let c = cam.rotation * centre + cam.translation;
    let dir = |p: Vector2<f64>| {
        let yn = (p.y - cam.cy) / cam.fy;
        Vector3::new((p.x - cam.cx) / cam.fx - cam.skew * yn, yn, 1.0)
    };
    // Ray direction is affine in s: d(s) = d0 + s d1. Cone: (d·c)² = (|c|² − r²)|d|².
    let d0 = dir(a);
    let d1 = dir(b) - d0;
    let k = c.norm_squared() - r * r;
    let (p, q) = (d0.dot(&c), d1.dot(&c));
    let qa = q * q - k * d1.norm_squared();
    let qb = 2.0 * (p * q - k * d0.dot(&d1));
    let qc = p * p - k * d0.norm_squared();
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
    let roots = [(-qb - disc) / (2.0 * qa), (-qb + disc) / (2.0 * qa)];
    roots
        .into_iter()
        .filter(|s| (0.0..=1.0).contains(s))
        .fold(f64::NAN, f64::min)
}

/// Area in pixels² of the ellipse a sphere projects to under a pinhole with
/// focal length `f` (square pixels): π f² r² √(|c|² − r²) / (c_z² − r²)^{3/2}.
pub fn projected_sphere_area(f: f64, c: &Vector3<f64>, r: f64) -> f64 {
    let r2 = r * r;
    std::f64::consts::PI * f * f * r2 * (c.norm_squared() - r2).sqrt() / (c.z * c.z - r2).powf(1.5)
}

/// Silhouettes of spheres computed with the projected-conic test per pixel.
pub fn sphere_silhouettes(rig: &fvv_core::CameraRig, spheres: &[(Vector3<f64>, f64)]) -> Vec<Mask> {
    rig.iter()
        .map(|cam| {
            Mask::from_fn(cam.width, cam.height, |x, y| {
                spheres
                    .iter()
                    .any(|(c, r)| in_projected_sphere(cam, c, *r, x as f64, y as f64))
            })
        })
        .collect()
}

/// Ten 4K cameras around an 18×18 m court.
pub fn volleyball_rig() -> RigSpec {
    RigSpec {
        count: 10,
        radius: 16000.0,
        heights: vec![3000.0, 6000.0],
        target: Vector3::new(0.0, 0.0, 1000.0),
        width: 3840,
        height: 2160,
        focal: 3000.0,
    }
}

/// A smaller version of the unit-sphere fixture that renders quickly.
pub fn small_sphere_spec() -> SceneSpec {
    let mut spec = SceneSpec::unit_sphere();
    spec.rig.width = 960;
    spec.rig.height = 540;
    spec.rig.focal = 750.0;
    spec
}

pub fn sphere_of(obj: &SceneObject) -> (Vector3<f64>, f64) {
    match obj.shape {
        Shape::Sphere { center, radius } => (center, radius),
        Shape::Box { .. } => panic!("not a sphere"),
    }
}

/// Triangles as vertex-coordinate triples, rotated so the smallest vertex
/// comes first, then sorted. Two meshes with equal output describe the same
/// oriented surface regardless of vertex numbering.
pub fn triangle_soup(mesh: &TriangleMesh) -> Vec<[[u64; 3]; 3]> {
    let key = |v: &Vector3<f64>| [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
    let mut out: Vec<[[u64; 3]; 3]> = (0..mesh.triangle_count())
        .map(|t| {
            let c = mesh.corners(t).map(|v| key(&v));
            let m = (0..3).min_by_key(|&i| c[i]).unwrap();
            [c[m], c[(m + 1) % 3], c[(m + 2) % 3]]
        })
        .collect();
    out.sort();
    out
}

/// UV sphere with outward winding.
pub fn uv_sphere(centre: Vector3<f64>, r: f64, rings: usize, segments: usize, object_id: u32) -> TriangleMesh {
    let mut vertices = vec![centre + Vector3::new(0.0, 0.0, r)];
    for i in 1..rings {
        let th = std::f64::consts::PI * i as f64 / rings as f64;
        for j in 0..segments {
            let ph = std::f64::consts::TAU * j as f64 / segments as f64;
            vertices.push(centre + r * Vector3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()));
        }
    }
    vertices.push(centre - Vector3::new(0.0, 0.0, r));
    let s = segments as u32;
    let ring = |i: u32, j: u32| 1 + (i - 1) * s + (j % s);
    let south = vertices.len() as u32 - 1;
    let mut triangles = Vec::new();
    for j in 0..s {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..rings as u32 - 1 {
        for j in 0..s {
            triangles.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            triangles.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    let last = rings as u32 - 1;
    for j in 0..s {
        triangles.push([south, ring(last, j + 1), ring(last, j)]);
    }
    let n = triangles.len();
    TriangleMesh {
        vertices,
        triangles,
        object_ids: vec![object_id; n],
    }
}
