use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Axis-aligned box in world millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    /// True when `max > min` on every axis.
    pub fn is_valid(&self) -> bool {
        (0..3).all(|a| self.max[a] > self.min[a] && self.min[a].is_finite() && self.max[a].is_finite())
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn expanded(&self, margin: f64) -> Self {
        let m = Vector3::repeat(margin);
        Self {
            min: self.min - m,
            max: self.max + m,
        }
    }

    /// Intersection with `other`; may be invalid if they do not overlap.
    pub fn clamped_to(&self, other: &Aabb) -> Self {
        Self {
            min: self.min.sup(&other.min),
            max: self.max.inf(&other.max),
        }
    }
}
