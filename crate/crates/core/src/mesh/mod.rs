//! Polygonization of voxel grids by marching cubes, with per-edge crossings
//! taken from silhouette boundaries (exact mode) or a constant (fixed mode).

mod io;
mod isovalue;
mod polygonize;
pub mod tables;

use nalgebra::Vector3;

pub use io::{read_ply, write_obj, write_ply};
pub use isovalue::{
    edge_isovalue, edge_isovalue_cam, isovalue_in_image, BresenhamLine, CameraIsovalue, EdgeIntersection,
    FALLBACK_LAMBDA,
};
pub use polygonize::{polygonize, IsoMode, PolygonizeStats, DEGENERATE_AREA};

/// Indexed triangle mesh in world millimetres.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    /// Object id per triangle.
    pub object_ids: Vec<u32>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Vector3<f64>; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    pub fn centroid(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(t);
        (a + b + c) / 3.0
    }

    /// Unnormalized normal, `(b - a) × (c - a)`.
    pub fn face_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self, t: usize) -> f64 {
        0.5 * self.face_normal(t).norm()
    }

    /// Concatenates meshes, keeping each triangle's object id.
    pub fn merge<'a>(meshes: impl IntoIterator<Item = &'a TriangleMesh>) -> TriangleMesh {
        let mut out = TriangleMesh::default();
        for m in meshes {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&m.vertices);
            out.triangles.extend(m.triangles.iter().map(|t| t.map(|i| i + base)));
            out.object_ids.extend_from_slice(&m.object_ids);
        }
        out
    }

    pub fn validate(&self) -> crate::Result<()> {
        let n = self.vertices.len() as u32;
        if self.object_ids.len() != self.triangles.len() {
            return Err(crate::Error::InvalidParameter(format!(
                "{} object ids for {} triangles",
                self.object_ids.len(),
                self.triangles.len()
            )));
        }
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(crate::Error::InvalidParameter(format!(
                "triangle {t:?} indexes past {n} vertices"
            )));
        }
        Ok(())
    }
}
