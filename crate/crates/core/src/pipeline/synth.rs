//! Ray-cast synthetic scenes: spheres and boxes seen by a ring of cameras.

use image::{Rgb, RgbImage};
use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calib::{CameraModel, CameraRig};
use crate::error::{Error, Result};
use crate::geom::Aabb;
use crate::silhouette::{build_background, BackgroundModel, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Sphere { center: Vector3<f64>, radius: f64 },
    Box { min: Vector3<f64>, max: Vector3<f64> },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Shape::Sphere { center, radius } => {
                if !(radius > 0.0 && radius.is_finite()) || !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::DegenerateObject(format!("sphere radius {radius}")));
                }
            }
            Shape::Box { min, max } => {
                if !(0..3).all(|a| min[a] < max[a] && min[a].is_finite() && max[a].is_finite()) {
                    return Err(Error::DegenerateObject(format!("box {min:?}..{max:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> Aabb {
        match *self {
            Shape::Sphere { center, radius } => Aabb::new(center, center).expanded(radius),
            Shape::Box { min, max } => Aabb::new(min, max),
        }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        match *self {
            Shape::Sphere { center, radius } => (p - center).norm_squared() <= radius * radius,
            Shape::Box { min, max } => Aabb::new(min, max).contains(p),
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Shape::Sphere { radius, .. } => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
            Shape::Box { min, max } => (max - min).product(),
        }
    }

    /// Nearest hit with `t > 0` along a unit-direction ray, with outward normal.
    pub fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
        match *self {
            Shape::Sphere { center, radius } => {
                let oc = o - center;
                let b = oc.dot(d);
                let disc = b * b - (oc.norm_squared() - radius * radius);
                if disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                let t = if -b - s > 0.0 { -b - s } else { -b + s };
                (t > 0.0).then(|| (t, (o + d * t - center) / radius))
            }
            Shape::Box { min, max } => {
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                let mut axis = 0;
                for a in 0..3 {
                    let inv = 1.0 / d[a];
                    let (mut lo, mut hi) = ((min[a] - o[a]) * inv, (max[a] - o[a]) * inv);
                    if lo > hi {
                        std::mem::swap(&mut lo, &mut hi);
                    }
                    if lo > t0 {
                        t0 = lo;
                        axis = a;
                    }
                    t1 = t1.min(hi);
                }
                if t0 > t1 || t0 <= 0.0 {
                    return None;
                }
                let mut n = Vector3::zeros();
                n[axis] = -d[axis].signum();
                Some((t0, n))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub shape: Shape,
    /// Linear RGB reflectance in 0..=255.
    pub albedo: [f64; 3],
}

/// Ring of cameras around `target`; camera `k` sits at angle `2πk/count` and
/// height `heights[k % heights.len()]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigSpec {
    pub count: usize,
    pub radius: f64,
    pub heights: Vec<f64>,
    pub target: Vector3<f64>,
    pub width: u32,
    pub height: u32,
    pub focal: f64,
}

impl RigSpec {
    pub fn build(&self) -> Result<CameraRig> {
        if self.heights.is_empty() {
            return Err(Error::InvalidParameter("rig spec needs at least one camera height".into()));
        }
        let cams = (0..self.count)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / self.count as f64;
                let eye = Vector3::new(
                    self.target.x + self.radius * a.cos(),
                    self.target.y + self.radius * a.sin(),
                    self.heights[k % self.heights.len()],
                );
                CameraModel::look_at(k as u32, self.width, self.height, self.focal, eye, self.target)
            })
            .collect();
        CameraRig::new(cams)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub objects: Vec<SceneObject>,
    pub rig: RigSpec,
    pub seed: u64,
    /// Gaussian sensor noise, in 8-bit levels.
    pub noise_sigma: f64,
    /// Object-free frames per camera for the background model.
    pub background_frames: usize,
    /// Proposals are the true silhouettes eroded by this many pixels.
    pub proposal_erosion: u32,
    pub light_dir: Vector3<f64>,
}

const AMBIENT: f64 = 0.35;

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        for o in &self.objects {
            o.shape.validate()?;
        }
        if self.background_frames < 2 {
            return Err(Error::TooFewFrames(self.background_frames));
        }
        if !(self.noise_sigma >= 0.0) || self.light_dir.norm() == 0.0 {
            return Err(Error::InvalidParameter("noise sigma must be >= 0 and light direction nonzero".into()));
        }
        Ok(())
    }

    fn base(objects: Vec<SceneObject>, rig: RigSpec) -> Self {
        Self {
            objects,
            rig,
            seed: 7,
            noise_sigma: 1.5,
            background_frames: 5,
            proposal_erosion: 2,
            light_dir: Vector3::new(0.3, 0.2, 1.0),
        }
    }

    /// Two spheres on the x axis; from camera 0 the nearer one hides part of the other.
    pub fn two_spheres() -> Self {
        Self::base(
            vec![
                SceneObject {
                    shape: Shape::Sphere {
                        center: Vector3::new(1200.0, 0.0, 600.0),
                        radius: 500.0,
                    },
                    albedo: [230.0, 120.0, 70.0],
                },
                SceneObject {
                    shape: Shape::Sphere {
                        center: Vector3::new(-1200.0, 0.0, 600.0),
                        radius: 500.0,
                    },
                    albedo: [90.0, 210.0, 120.0],
                },
            ],
            RigSpec {
                count: 10,
                radius: 7000.0,
                heights: vec![1500.0, 3000.0],
                target: Vector3::new(0.0, 0.0, 600.0),
                width: 960,
                height: 540,
                focal: 900.0,
            },
        )
    }

    /// Spheres and boxes of mixed sizes.
    pub fn multi_object() -> Self {
        let obj = |shape, albedo| SceneObject { shape, albedo };
        Self::base(
            vec![
                obj(
                    Shape::Sphere {
                        center: Vector3::new(-1500.0, -900.0, 700.0),
                        radius: 600.0,
                    },
                    [230.0, 120.0, 70.0],
                ),
                obj(
                    Shape::Box {
                        min: Vector3::new(800.0, -1500.0, 0.0),
                        max: Vector3::new(1500.0, -700.0, 1800.0),
                    },
                    [220.0, 200.0, 90.0],
                ),
                obj(
                    Shape::Sphere {
                        center: Vector3::new(300.0, 1400.0, 450.0),
                        radius: 450.0,
                    },
                    [90.0, 210.0, 120.0],
                ),
                obj(
                    Shape::Box {
                        min: Vector3::new(-1700.0, 1000.0, 0.0),
                        max: Vector3::new(-1000.0, 1900.0, 900.0),
                    },
                    [200.0, 110.0, 220.0],
                ),
            ],
            RigSpec {
                count: 10,
                radius: 7500.0,
                heights: vec![1500.0, 3000.0],
                target: Vector3::new(0.0, 0.0, 700.0),
                width: 960,
                height: 540,
                focal: 800.0,
            },
        )
    }

    /// A single sphere of radius 1000 mm at the centre of a 12-camera 1080p ring.
    pub fn unit_sphere() -> Self {
        Self::base(
            vec![SceneObject {
                shape: Shape::Sphere {
                    center: Vector3::new(0.0, 0.0, 1000.0),
                    radius: 1000.0,
                },
                albedo: [230.0, 150.0, 80.0],
            }],
            RigSpec {
                count: 12,
                radius: 6000.0,
                heights: vec![1200.0, 2600.0],
                target: Vector3::new(0.0, 0.0, 1000.0),
                width: 1920,
                height: 1080,
                focal: 1500.0,
            },
        )
    }

    /// Small objects in a large volume, for timing sweeps.
    pub fn sweep_scene() -> Self {
        let mut s = Self::two_spheres();
        for (o, x) in s.objects.iter_mut().zip([900.0, -900.0]) {
            o.shape = Shape::Sphere {
                center: Vector3::new(x, 300.0, 400.0),
                radius: 300.0,
            };
        }
        s.rig.focal = 1800.0;
        s
    }

    /// Stage volume used with [`SceneSpec::sweep_scene`]. Sized so a 20 mm
    /// coarse grid stays within the default voxel budget.
    pub fn sweep_stage() -> Aabb {
        Aabb::new(Vector3::new(-6000.0, -6000.0, 0.0), Vector3::new(6000.0, 6000.0, 6000.0))
    }
}

/// One rendered frame of a synthetic scene plus its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticFrame {
    pub rig: CameraRig,
    pub frames: Vec<RgbImage>,
    pub backgrounds: Vec<BackgroundModel>,
    pub proposals: Vec<Mask>,
    /// Exact silhouettes: pixels whose centre ray hits an object.
    pub silhouettes: Vec<Mask>,
    pub objects: Vec<SceneObject>,
}

fn background_color(cam: u32, x: u32, y: u32) -> [f64; 3] {
    let (x, y, k) = (x as f64, y as f64, cam as f64);
    [
        30.0 + 6.0 * (0.031 * x + 0.017 * y + k).sin(),
        35.0 + 6.0 * (0.023 * x - 0.029 * y + k).cos(),
        45.0 + 5.0 * (0.019 * (x + y)).sin(),
    ]
}

/// Nearest hit over all objects along the centre ray of `pixel`.
pub fn cast(objects: &[SceneObject], cam: &CameraModel, pixel: &Vector2<f64>) -> Option<(usize, f64, Vector3<f64>)> {
    let o = cam.center();
    let d = cam.pixel_ray(pixel);
    objects
        .iter()
        .enumerate()
        .filter_map(|(i, obj)| obj.shape.intersect(&o, &d).map(|(t, n)| (i, t, n)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

/// Noise-free shaded colour at every pixel, and the exact silhouette.
pub fn render_clean(spec: &SceneSpec, cam: &CameraModel) -> (Vec<[f64; 3]>, Mask) {
    let light = spec.light_dir.normalize();
    let (w, h) = (cam.width, cam.height);
    let px: Vec<([f64; 3], bool)> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            match cast(&spec.objects, cam, &Vector2::new(x as f64, y as f64)) {
                Some((k, _, n)) => {
                    let s = AMBIENT + (1.0 - AMBIENT) * n.dot(&light).max(0.0);
                    (spec.objects[k].albedo.map(|a| a * s), true)
                }
                None => (background_color(cam.id, x, y), false),
            }
        })
        .collect();
    let mask = Mask::from_bits(w, h, px.iter().map(|p| p.1).collect()).expect("sized");
    (px.into_iter().map(|p| p.0).collect(), mask)
}

fn noisy(clean: &[[f64; 3]], w: u32, h: u32, sigma: f64, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let mut img = RgbImage::new(w, h);
    for (p, c) in img.pixels_mut().zip(clean) {
        *p = Rgb(c.map(|v| {
            let n = if sigma > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            (v + n).round().clamp(0.0, 255.0) as u8
        }));
    }
    img
}

fn frame_seed(seed: u64, cam: u32, frame: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((cam as u64) << 32) ^ frame
}

/// The object-free frames camera `cam` records for its background model.
pub fn background_frames(spec: &SceneSpec, cam: &CameraModel) -> Vec<RgbImage> {
    let (w, h) = (cam.width, cam.height);
    let empty: Vec<[f64; 3]> = (0..w * h).map(|i| background_color(cam.id, i % w, i / w)).collect();
    (0..spec.background_frames as u64)
        .map(|f| noisy(&empty, w, h, spec.noise_sigma, frame_seed(spec.seed, cam.id, f + 1)))
        .collect()
}

pub fn generate_synthetic_scene(spec: &SceneSpec) -> Result<SyntheticFrame> {
    spec.validate()?;
    let rig = spec.rig.build()?;
    let per_cam: Vec<Result<(RgbImage, BackgroundModel, Mask, Mask)>> = rig
        .cameras()
        .iter()
        .map(|cam| {
            let (w, h) = (cam.width, cam.height);
            let (clean, sil) = render_clean(spec, cam);
            let frame = noisy(&clean, w, h, spec.noise_sigma, frame_seed(spec.seed, cam.id, 0));
            let bg = build_background(&background_frames(spec, cam))?;
            let proposal = sil.eroded(spec.proposal_erosion);
            Ok((frame, bg, proposal, sil))
        })
        .collect();
    let mut out = SyntheticFrame {
        rig,
        frames: Vec::new(),
        backgrounds: Vec::new(),
        proposals: Vec::new(),
        silhouettes: Vec::new(),
        objects: spec.objects.clone(),
    };
    for r in per_cam {
        let (f, b, p, s) = r?;
        out.frames.push(f);
        out.backgrounds.push(b);
        out.proposals.push(p);
        out.silhouettes.push(s);
    }
    Ok(out)
}

/// Shaded frames and exact silhouettes only, with no noise or background model.
pub fn render_analytic(spec: &SceneSpec) -> Result<(CameraRig, Vec<RgbImage>, Vec<Mask>)> {
    for o in &spec.objects {
        o.shape.validate()?;
    }
    let rig = spec.rig.build()?;
    let mut frames = Vec::new();
    let mut sils = Vec::new();
    for cam in rig.iter() {
        let (clean, sil) = render_clean(spec, cam);
        frames.push(noisy(&clean, cam.width, cam.height, 0.0, 0));
        sils.push(sil);
    }
    Ok((rig, frames, sils))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mut s: SceneSpec) -> SceneSpec {
        s.rig.width = 160;
        s.rig.height = 90;
        s.rig.focal = 150.0;
        s
    }

    #[test]
    fn centred_sphere_gives_centred_disk() {
        let mut s = small(SceneSpec::unit_sphere());
        s.rig.width = 161;
        s.rig.height = 91;
        s.rig.heights = vec![1000.0];
        let (rig, _, sils) = render_analytic(&s).unwrap();
        let sil = &sils[0];
        let (cx, cy) = (rig.get(0).cx, rig.get(0).cy);
        assert!(sil.get(cx as u32, cy as u32));
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for y in 0..sil.height() {
            for x in 0..sil.width() {
                if sil.get(x, y) {
                    sx += x as f64;
                    sy += y as f64;
                    n += 1.0;
                }
            }
        }
        assert!((sx / n - cx).abs() < 1e-9 && (sy / n - cy).abs() < 1e-9);
        // Symmetric under reflection through the principal point.
        for y in 0..sil.height() {
            for x in 0..sil.width() {
                assert_eq!(sil.get(x, y), sil.get(sil.width() - 1 - x, sil.height() - 1 - y));
            }
        }
    }

    #[test]
    fn empty_scene_is_all_background() {
        let mut s = small(SceneSpec::two_spheres());
        s.objects.clear();
        let f = generate_synthetic_scene(&s).unwrap();
        assert!(f.silhouettes.iter().all(Mask::is_empty));
        assert!(f.proposals.iter().all(Mask::is_empty));
    }

    #[test]
    fn degenerate_object_rejected() {
        let mut s = small(SceneSpec::two_spheres());
        s.objects[0].shape = Shape::Sphere {
            center: Vector3::zeros(),
            radius: 0.0,
        };
        assert!(matches!(generate_synthetic_scene(&s), Err(Error::DegenerateObject(_))));
        s.objects[0].shape = Shape::Box {
            min: Vector3::zeros(),
            max: Vector3::new(1.0, -1.0, 1.0),
        };
        assert!(generate_synthetic_scene(&s).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let s = small(SceneSpec::multi_object());
        let a = generate_synthetic_scene(&s).unwrap();
        let b = generate_synthetic_scene(&s).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.backgrounds, b.backgrounds);
    }

    #[test]
    fn box_hit_normals() {
        let b = Shape::Box {
            min: Vector3::new(-1.0, -1.0, -1.0),
            max: Vector3::new(1.0, 1.0, 1.0),
        };
        let (t, n) = b.intersect(&Vector3::new(-5.0, 0.2, 0.1), &Vector3::x()).unwrap();
        assert!((t - 4.0).abs() < 1e-12);
        assert_eq!(n, Vector3::new(-1.0, 0.0, 0.0));
        assert!(b.intersect(&Vector3::new(-5.0, 3.0, 0.0), &Vector3::x()).is_none());
        assert!(b.intersect(&Vector3::new(5.0, 0.0, 0.0), &Vector3::x()).is_none());
    }

    #[test]
    fn spec_toml_round_trip() {
        let s = SceneSpec::multi_object();
        let text = toml::to_string(&s).unwrap();
        assert_eq!(toml::from_str::<SceneSpec>(&text).unwrap(), s);
    }
}
