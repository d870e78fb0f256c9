//! Per-edge surface crossing estimated from silhouette boundaries.

use nalgebra::{Vector2, Vector3};

use crate::calib::{CameraModel, CameraRig};
use crate::silhouette::Mask;

/// Fallback crossing when no camera sees both endpoints of an edge.
pub const FALLBACK_LAMBDA: f64 = 0.5;

/// Integer pixels on the Bresenham line from `from` to `to`, both inclusive.
#[derive(Debug, Clone)]
pub struct BresenhamLine {
    x: i64,
    y: i64,
    dx: i64,
    dy: i64,
    sx: i64,
    sy: i64,
    err: i64,
    end: (i64, i64),
    done: bool,
}

impl BresenhamLine {
    pub fn new(from: (i64, i64), to: (i64, i64)) -> Self {
        let dx = (to.0 - from.0).abs();
        let dy = -(to.1 - from.1).abs();
        Self {
            x: from.0,
            y: from.1,
            dx,
            dy,
            sx: if from.0 < to.0 { 1 } else { -1 },
            sy: if from.1 < to.1 { 1 } else { -1 },
            err: dx + dy,
            end: to,
            done: false,
        }
    }
}

impl Iterator for BresenhamLine {
    type Item = (i64, i64);

    fn next(&mut self) -> Option<(i64, i64)> {
        if self.done {
            return None;
        }
        let cur = (self.x, self.y);
        if cur == self.end {
            self.done = true;
            return Some(cur);
        }
        let e2 = 2 * self.err;
        if e2 >= self.dy {
            self.err += self.dy;
            self.x += self.sx;
        }
        if e2 <= self.dx {
            self.err += self.dx;
            self.y += self.sy;
        }
        Some(cur)
    }
}

/// Crossing reported by a single camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIsovalue {
    pub lambda: f64,
    /// `P_on` projected onto background: the carve and this silhouette disagree.
    pub on_background: bool,
}

/// Walks the projected edge from `P_on` toward `P_off` and returns the fraction
/// of the projected length reached by the last foreground pixel before the
/// first background one. A foreground `P_off` pixel means the camera does
/// not constrain the edge (λ = 1). Both endpoints must be in the camera's frustum.
pub fn edge_isovalue_cam(cam: &CameraModel, sil: &Mask, p_on: &Vector3<f64>, p_off: &Vector3<f64>) -> CameraIsovalue {
    let a = cam.project(p_on).pixel;
    let b = cam.project(p_off).pixel;
    isovalue_in_image(sil, a, b)
}

/// Image-space part of [`edge_isovalue_cam`] for already projected endpoints.
pub fn isovalue_in_image(sil: &Mask, a: Vector2<f64>, b: Vector2<f64>) -> CameraIsovalue {
    let round = |p: Vector2<f64>| ((p.x + 0.5).floor() as i64, (p.y + 0.5).floor() as i64);
    let (start, end) = (round(a), round(b));
    if !sil.get_signed(start.0, start.1) {
        return CameraIsovalue {
            lambda: 0.0,
            on_background: true,
        };
    }
    if sil.get_signed(end.0, end.1) {
        return CameraIsovalue {
            lambda: 1.0,
            on_background: false,
        };
    }
    let mut last_fg = start;
    for px in BresenhamLine::new(start, end) {
        if !sil.get_signed(px.0, px.1) {
            let len = (b - a).norm();
            let reached = (Vector2::new(last_fg.0 as f64, last_fg.1 as f64) - a).norm();
            let lambda = if len > 0.0 { (reached / len).clamp(0.0, 1.0) } else { 0.0 };
            return CameraIsovalue {
                lambda,
                on_background: false,
            };
        }
        last_fg = px;
    }
    CameraIsovalue {
        lambda: 1.0,
        on_background: false,
    }
}

/// Surface crossing on a grid edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeIntersection {
    pub p_on: Vector3<f64>,
    pub p_off: Vector3<f64>,
    pub lambda: f64,
    /// Camera attaining the minimum, `None` when the fallback was used.
    pub contributing_camera: Option<u32>,
    /// Some camera saw `P_on` on background.
    pub inconsistent: bool,
}

impl EdgeIntersection {
    pub fn point(&self) -> Vector3<f64> {
        self.p_on + (self.p_off - self.p_on) * self.lambda
    }

    pub fn is_fallback(&self) -> bool {
        self.contributing_camera.is_none()
    }
}

/// Minimum per-camera crossing over the cameras that see both endpoints.
pub fn edge_isovalue(rig: &CameraRig, sils: &[Mask], p_on: &Vector3<f64>, p_off: &Vector3<f64>) -> EdgeIntersection {
    let mut best: Option<(f64, u32)> = None;
    let mut inconsistent = false;
    for (cam, sil) in rig.iter().zip(sils) {
        let a = cam.project(p_on);
        let b = cam.project(p_off);
        if !(a.in_frustum && b.in_frustum) {
            continue;
        }
        let iso = isovalue_in_image(sil, a.pixel, b.pixel);
        inconsistent |= iso.on_background;
        let better = match best {
            None => true,
            Some((l, id)) => iso.lambda < l || (iso.lambda == l && cam.id < id),
        };
        if better {
            best = Some((iso.lambda, cam.id));
        }
    }
    let (lambda, contributing_camera) = match best {
        Some((l, id)) => (l, Some(id)),
        None => (FALLBACK_LAMBDA, None),
    };
    EdgeIntersection {
        p_on: *p_on,
        p_off: *p_off,
        lambda,
        contributing_camera,
        inconsistent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    #[test]
    fn bresenham_endpoints_and_connectivity() {
        for &(a, b) in &[((0, 0), (10, 3)), ((5, 5), (-3, 9)), ((2, 2), (2, 2)), ((0, 0), (0, -7)), ((1, 1), (8, 8))] {
            let pts: Vec<_> = BresenhamLine::new(a, b).collect();
            assert_eq!(pts[0], a);
            assert_eq!(*pts.last().unwrap(), b);
            let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()) as usize;
            assert_eq!(pts.len(), steps + 1);
            for w in pts.windows(2) {
                assert!((w[1].0 - w[0].0).abs() <= 1 && (w[1].1 - w[0].1).abs() <= 1);
            }
        }
    }

    fn strip(width: u32, fg_until: u32) -> Mask {
        Mask::from_fn(width, 3, |x, _| x <= fg_until)
    }

    #[test]
    fn all_foreground_is_unconstrained() {
        let m = Mask::filled(20, 20, true);
        let r = isovalue_in_image(&m, Vector2::new(2.0, 2.0), Vector2::new(15.0, 9.0));
        assert_eq!(r.lambda, 1.0);
        assert!(!r.on_background);
    }

    #[test]
    fn ten_pixel_segment_boundary_after_fourth() {
        // Pixels 0..=4 foreground, 5.. background; segment 0 → 10.
        let r = isovalue_in_image(&strip(12, 4), Vector2::new(0.0, 1.0), Vector2::new(10.0, 1.0));
        assert!((r.lambda - 0.4).abs() <= 0.1 + 1e-12, "{}", r.lambda);
    }

    #[test]
    fn background_start_is_flagged() {
        let r = isovalue_in_image(&strip(12, 4), Vector2::new(6.0, 1.0), Vector2::new(0.0, 1.0));
        assert!(r.on_background);
        assert_eq!(r.lambda, 0.0);
    }

    #[test]
    fn stops_at_first_background() {
        // fg 0..=2, bg 3, fg 4..=7, bg 8..
        let m = Mask::from_fn(12, 1, |x, _| x != 3 && x < 8);
        let r = isovalue_in_image(&m, Vector2::new(0.0, 0.0), Vector2::new(10.0, 0.0));
        assert!((r.lambda - 0.2).abs() < 1e-12);
    }

    #[test]
    fn foreground_end_pixel_is_unconstrained() {
        let m = Mask::from_fn(12, 1, |x, _| x != 3);
        let r = isovalue_in_image(&m, Vector2::new(0.0, 0.0), Vector2::new(10.0, 0.0));
        assert_eq!(r.lambda, 1.0);
    }

    fn cam(id: u32) -> CameraModel {
        CameraModel {
            id,
            width: 100,
            height: 100,
            fx: 100.0,
            fy: 100.0,
            cx: 50.0,
            cy: 50.0,
            skew: 0.0,
            dist: [0.0; 5],
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    #[test]
    fn minimum_over_cameras_with_lowest_id_tiebreak() {
        // Three identical cameras; silhouettes cut the edge at different columns.
        let rig = CameraRig::new(vec![cam(4), cam(2), cam(9)]).unwrap();
        let p_on = Vector3::new(0.0, 0.0, 1000.0); // pixel (50, 50)
        let p_off = Vector3::new(100.0, 0.0, 1000.0); // pixel (60, 50)
        let cut = |c: u32| Mask::from_fn(100, 100, move |x, _| x <= c);
        let sils = vec![cut(57), cut(54), cut(59)];
        let e = edge_isovalue(&rig, &sils, &p_on, &p_off);
        assert!((e.lambda - 0.4).abs() < 1e-12);
        assert_eq!(e.contributing_camera, Some(2));

        let tied = vec![cut(54), cut(54), cut(59)];
        assert_eq!(edge_isovalue(&rig, &tied, &p_on, &p_off).contributing_camera, Some(2));

        let single = CameraRig::new(vec![cam(4)]).unwrap();
        let e = edge_isovalue(&single, &sils[..1], &p_on, &p_off);
        assert!((e.lambda - 0.7).abs() < 1e-12);
    }

    #[test]
    fn fallback_when_unseen() {
        let rig = CameraRig::new(vec![cam(0)]).unwrap();
        let sils = vec![Mask::filled(100, 100, true)];
        let e = edge_isovalue(&rig, &sils, &Vector3::new(0.0, 0.0, -10.0), &Vector3::new(0.0, 0.0, -20.0));
        assert_eq!(e.lambda, FALLBACK_LAMBDA);
        assert!(e.is_fallback());
    }
}
