//! Binary little-endian PLY and text OBJ.
//!
//! PLY layout: `vertex` with double x/y/z, `face` with a `uchar`/`int`
//! index list followed by an `int object_id`.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::Vector3;

use super::TriangleMesh;
use crate::error::{Error, Result};

const PLY_HEADER_LIMIT: usize = 64;

pub fn write_ply(mesh: &TriangleMesh, mut w: impl Write) -> std::io::Result<()> {
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nproperty int object_id\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    )?;
    let mut buf = Vec::with_capacity(mesh.vertices.len() * 24 + mesh.triangles.len() * 17);
    for v in &mesh.vertices {
        for c in [v.x, v.y, v.z] {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    for (t, id) in mesh.triangles.iter().zip(&mesh.object_ids) {
        buf.push(3);
        for i in t {
            buf.extend_from_slice(&(*i as i32).to_le_bytes());
        }
        buf.extend_from_slice(&(*id as i32).to_le_bytes());
    }
    w.write_all(&buf)
}

fn parse_err(message: impl Into<String>) -> Error {
    Error::Parse {
        what: "ply".into(),
        message: message.into(),
    }
}

/// Reads exactly the layout produced by [`write_ply`].
pub fn read_ply(r: impl Read) -> Result<TriangleMesh> {
    let mut r = BufReader::new(r);
    let mut header = Vec::new();
    let mut line = String::new();
    loop {
        line.clear();
        let n = r.read_line(&mut line).map_err(|e| parse_err(e.to_string()))?;
        if n == 0 {
            return Err(parse_err("unterminated header"));
        }
        let l = line.trim_end().to_string();
        if l == "end_header" {
            break;
        }
        header.push(l);
        if header.len() > PLY_HEADER_LIMIT {
            return Err(parse_err("header too long"));
        }
    }
    let expected = [
        "ply",
        "format binary_little_endian 1.0",
        "",
        "property double x",
        "property double y",
        "property double z",
        "",
        "property list uchar int vertex_indices",
        "property int object_id",
    ];
    if header.len() != expected.len() {
        return Err(parse_err("unexpected header layout"));
    }
    let mut counts = [0usize; 2];
    for (k, (got, want)) in header.iter().zip(expected).enumerate() {
        let slot = match k {
            2 => Some((0, "element vertex ")),
            6 => Some((1, "element face ")),
            _ => None,
        };
        match slot {
            Some((c, prefix)) => {
                counts[c] = got
                    .strip_prefix(prefix)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| parse_err(format!("bad element line '{got}'")))?;
            }
            None if got != want => return Err(parse_err(format!("expected '{want}', got '{got}'"))),
            None => {}
        }
    }
    let [nv, nf] = counts;
    let mut body = Vec::new();
    r.read_to_end(&mut body).map_err(|e| parse_err(e.to_string()))?;
    if body.len() != nv * 24 + nf * 17 {
        return Err(parse_err(format!("body is {} bytes, expected {}", body.len(), nv * 24 + nf * 17)));
    }
    let f64_at = |o: usize| f64::from_le_bytes(body[o..o + 8].try_into().unwrap());
    let i32_at = |o: usize| i32::from_le_bytes(body[o..o + 4].try_into().unwrap());
    let vertices = (0..nv)
        .map(|v| Vector3::new(f64_at(v * 24), f64_at(v * 24 + 8), f64_at(v * 24 + 16)))
        .collect();
    let mut triangles = Vec::with_capacity(nf);
    let mut object_ids = Vec::with_capacity(nf);
    for f in 0..nf {
        let o = nv * 24 + f * 17;
        if body[o] != 3 {
            return Err(parse_err(format!("face {f} has {} indices", body[o])));
        }
        let idx = [i32_at(o + 1), i32_at(o + 5), i32_at(o + 9)];
        if idx.iter().any(|&i| i < 0 || i as usize >= nv) {
            return Err(parse_err(format!("face {f} index out of range")));
        }
        let id = i32_at(o + 13);
        if id < 0 {
            return Err(parse_err(format!("face {f} has negative object id")));
        }
        triangles.push(idx.map(|i| i as u32));
        object_ids.push(id as u32);
    }
    Ok(TriangleMesh {
        vertices,
        triangles,
        object_ids,
    })
}

/// One `g object_<id>` group per run of equal object ids.
pub fn write_obj(mesh: &TriangleMesh, mut w: impl Write) -> std::io::Result<()> {
    let mut out = String::new();
    for v in &mesh.vertices {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    let mut current = None;
    for (t, &id) in mesh.triangles.iter().zip(&mesh.object_ids) {
        if current != Some(id) {
            out.push_str(&format!("g object_{id}\n"));
            current = Some(id);
        }
        out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    w.write_all(out.as_bytes())
}
