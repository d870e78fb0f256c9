//! Binary silhouettes from a per-pixel background model, with the
//! separation threshold relaxed near externally supplied foreground proposals.

use std::path::Path;

use image::{GrayImage, Luma, RgbImage};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Lower bound on the background standard deviation, in 8-bit units.
pub const STD_FLOOR: f64 = 2.0;

/// Per-pixel binary occupancy, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self::filled(width, height, false)
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool + Sync) -> Self {
        let bits = (0..height)
            .into_par_iter()
            .flat_map_iter(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self { width, height, bits }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    /// Like [`Self::get`] but `false` outside the image.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as u64) < self.width as u64 && (y as u64) < self.height as u64 && self.get(x as u32, y as u32)
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn transposed(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    /// Intersection over union; 1 when both masks are empty.
    pub fn iou(&self, other: &Mask) -> f64 {
        assert_eq!(self.dims(), other.dims());
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Erosion with a square structuring element of the given radius.
    pub fn eroded(&self, radius: u32) -> Self {
        let r = radius as i64;
        Self::from_fn(self.width, self.height, |x, y| {
            (-r..=r).all(|dy| (-r..=r).all(|dx| self.get_signed(x as i64 + dx, y as i64 + dy)))
        })
    }

    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| Luma([if self.get(x, y) { 255 } else { 0 }]))
    }

    /// Nonzero pixels are foreground.
    pub fn from_image(img: &GrayImage) -> Self {
        Self::from_fn(img.width(), img.height(), |x, y| img.get_pixel(x, y)[0] != 0)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.into(),
            source,
        })?;
        Ok(Self::from_image(&img.to_luma8()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_image().save(path).map_err(|source| Error::Image {
            path: path.into(),
            source,
        })
    }
}

/// Euclidean distance (pixels) from each pixel to the nearest proposal pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    pub width: u32,
    pub height: u32,
    pub d: Vec<f64>,
}

impl DistanceMap {
    /// Value stored everywhere when the proposal mask is empty.
    pub const EMPTY: f64 = f64::MAX;

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.d[y as usize * self.width as usize + x as usize]
    }
}

const EDT_INF: f64 = 1e20;

/// One-dimensional squared distance transform of sampled function `f`
/// (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        let mut s;
        loop {
            let p = v[k];
            s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            // z[0] is -inf, so k never underflows.
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// Exact Euclidean distance transform: columns then rows, separable.
pub fn distance_map(proposal: &Mask) -> DistanceMap {
    let (w, h) = (proposal.width as usize, proposal.height as usize);
    if proposal.is_empty() {
        return DistanceMap {
            width: proposal.width,
            height: proposal.height,
            d: vec![DistanceMap::EMPTY; w * h],
        };
    }

    // Column pass, stored column-major.
    let mut cols = vec![0.0f64; w * h];
    cols.par_chunks_mut(h.max(1)).enumerate().for_each(|(x, col)| {
        let f: Vec<f64> = (0..h)
            .map(|y| if proposal.bits[y * w + x] { 0.0 } else { EDT_INF })
            .collect();
        let mut v = vec![0usize; h];
        let mut z = vec![0.0f64; h + 1];
        edt_1d(&f, col, &mut v, &mut z);
    });

    let mut d = vec![0.0f64; w * h];
    d.par_chunks_mut(w.max(1)).enumerate().for_each(|(y, row)| {
        let f: Vec<f64> = (0..w).map(|x| cols[x * h + y]).collect();
        let mut v = vec![0usize; w];
        let mut z = vec![0.0f64; w + 1];
        edt_1d(&f, row, &mut v, &mut z);
        for px in row.iter_mut() {
            *px = px.sqrt();
        }
    });

    DistanceMap {
        width: proposal.width,
        height: proposal.height,
        d,
    }
}

/// Per-pixel, per-channel background statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundModel {
    pub width: u32,
    pub height: u32,
    pub mean: Vec<[f64; 3]>,
    pub std: Vec<[f64; 3]>,
}

/// Builds a background model from object-free frames, clamping std to [`STD_FLOOR`].
pub fn build_background(frames: &[RgbImage]) -> Result<BackgroundModel> {
    build_background_with_floor(frames, STD_FLOOR)
}

pub fn build_background_with_floor(frames: &[RgbImage], std_floor: f64) -> Result<BackgroundModel> {
    if frames.len() < 2 {
        return Err(Error::TooFewFrames(frames.len()));
    }
    let (w, h) = frames[0].dimensions();
    if let Some(bad) = frames.iter().find(|f| f.dimensions() != (w, h)) {
        return Err(Error::DimensionMismatch(format!(
            "background frame {}x{} differs from {w}x{h}",
            bad.width(),
            bad.height()
        )));
    }
    let n = w as usize * h as usize;
    // Welford accumulation, one frame at a time.
    let mut mean = vec![[0.0f64; 3]; n];
    let mut m2 = vec![[0.0f64; 3]; n];
    for (t, frame) in frames.iter().enumerate() {
        let count = (t + 1) as f64;
        let raw = frame.as_raw();
        mean.par_iter_mut()
            .zip(m2.par_iter_mut())
            .enumerate()
            .for_each(|(i, (mu, s))| {
                for c in 0..3 {
                    let x = raw[3 * i + c] as f64;
                    let delta = x - mu[c];
                    mu[c] += delta / count;
                    s[c] += delta * (x - mu[c]);
                }
            });
    }
    let count = frames.len() as f64;
    let std = m2
        .par_iter()
        .map(|s| s.map(|v| (v / count).sqrt().max(std_floor)))
        .collect();
    Ok(BackgroundModel {
        width: w,
        height: h,
        mean,
        std,
    })
}

/// Threshold schedule in units of background standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdaptiveParams {
    pub theta_near: f64,
    pub theta_far: f64,
    pub d_max: f64,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self {
            theta_near: 3.0,
            theta_far: 8.0,
            d_max: 40.0,
        }
    }
}

impl AdaptiveParams {
    pub fn new(theta_near: f64, theta_far: f64, d_max: f64) -> Result<Self> {
        let p = Self {
            theta_near,
            theta_far,
            d_max,
        };
        p.validate()?;
        Ok(p)
    }

    /// Single fixed threshold, i.e. plain background subtraction.
    pub fn fixed(theta: f64) -> Self {
        Self {
            theta_near: theta,
            theta_far: theta,
            d_max: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_near > 0.0 && self.theta_near <= self.theta_far && self.d_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "adaptive thresholds need 0 < theta_near <= theta_far and d_max > 0 (got {:?})",
                self
            )));
        }
        Ok(())
    }

    /// Threshold at distance `d`: linear ramp from `theta_near` to `theta_far`, saturating at `d_max`.
    #[inline]
    pub fn theta(&self, d: f64) -> f64 {
        self.theta_near + (self.theta_far - self.theta_near) * (d / self.d_max).min(1.0)
    }
}

/// Foreground where the largest normalized channel deviation exceeds `θ(d)`.
pub fn extract_silhouette(
    frame: &RgbImage,
    bg: &BackgroundModel,
    dm: &DistanceMap,
    params: &AdaptiveParams,
) -> Result<Mask> {
    params.validate()?;
    let dims = frame.dimensions();
    if (bg.width, bg.height) != dims || (dm.width, dm.height) != dims {
        return Err(Error::DimensionMismatch(format!(
            "frame {}x{}, background {}x{}, distance map {}x{}",
            dims.0, dims.1, bg.width, bg.height, dm.width, dm.height
        )));
    }
    let raw = frame.as_raw();
    let bits = (0..raw.len() / 3)
        .into_par_iter()
        .map(|i| {
            let (mu, sd) = (&bg.mean[i], &bg.std[i]);
            let dev = (0..3)
                .map(|c| (raw[3 * i + c] as f64 - mu[c]).abs() / sd[c])
                .fold(0.0f64, f64::max);
            dev > params.theta(dm.d[i])
        })
        .collect();
    Ok(Mask {
        width: dims.0,
        height: dims.1,
        bits,
    })
}
