//! Wavefront OBJ loading.
//!
//! Supports v/vt/vn/f records with 1-based (or negative, relative) indices.
//! Quads are split deterministically along the v0-v2 diagonal. OBJ indexes
//! positions and UVs independently per face corner; since the pipeline keeps
//! UVs per vertex, each distinct (position, uv, normal) triple becomes its
//! own vertex on load.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::math::{Vec2, Vec3};
use crate::mesh::Mesh;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f32(tok: &str, line: usize, what: &str) -> Result<f32> {
    tok.parse::<f32>()
        .map_err(|_| parse_err(line, format!("invalid {what} value '{tok}'")))
}

/// Resolve a 1-based or negative (relative) OBJ index against a list length.
fn resolve_index(raw: i64, len: usize, line: usize, what: &str) -> Result<usize> {
    let idx = if raw > 0 {
        raw - 1
    } else if raw < 0 {
        len as i64 + raw
    } else {
        return Err(parse_err(line, format!("{what} index 0 (OBJ indices are 1-based)")));
    };
    if idx < 0 || idx as usize >= len {
        return Err(parse_err(
            line,
            format!("{what} index {raw} out of range (count {len})"),
        ));
    }
    Ok(idx as usize)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Corner {
    v: usize,
    vt: Option<usize>,
    vn: Option<usize>,
}

/// Load an OBJ document. The result is normalized to the unit cube and has
/// per-vertex normals (computed when the file carries none).
pub fn load_mesh(bytes: &[u8]) -> Result<Mesh> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| parse_err(0, "OBJ document is not valid UTF-8"))?;

    let mut positions: Vec<Vec3> = Vec::new();
    let mut texcoords: Vec<Vec2> = Vec::new();
    let mut normals: Vec<Vec3> = Vec::new();
    let mut face_corners: Vec<[Corner; 3]> = Vec::new();
    let mut any_vt = false;
    let mut any_vn = false;

    for (lineno, raw_line) in text.lines().enumerate() {
        let line_num = lineno + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let tag = tokens.next().unwrap();
        match tag {
            "v" => {
                let mut c = [0.0f32; 3];
                for coord in &mut c {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| parse_err(line_num, "vertex needs 3 coordinates"))?;
                    *coord = parse_f32(tok, line_num, "vertex")?;
                }
                positions.push(Vec3::new(c[0], c[1], c[2]));
            }
            "vt" => {
                let u = parse_f32(
                    tokens
                        .next()
                        .ok_or_else(|| parse_err(line_num, "vt needs at least 1 coordinate"))?,
                    line_num,
                    "texcoord",
                )?;
                let v = match tokens.next() {
                    Some(tok) => parse_f32(tok, line_num, "texcoord")?,
                    None => 0.0,
                };
                texcoords.push(Vec2::new(u, v));
            }
            "vn" => {
                let mut c = [0.0f32; 3];
                for coord in &mut c {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| parse_err(line_num, "normal needs 3 coordinates"))?;
                    *coord = parse_f32(tok, line_num, "normal")?;
                }
                normals.push(Vec3::new(c[0], c[1], c[2]));
            }
            "f" => {
                let mut corners = Vec::with_capacity(4);
                for tok in tokens {
                    let mut parts = tok.split('/');
                    let v_raw = parts
                        .next()
                        .filter(|s| !s.is_empty())
                        .ok_or_else(|| parse_err(line_num, format!("malformed face corner '{tok}'")))?
                        .parse::<i64>()
                        .map_err(|_| parse_err(line_num, format!("malformed face corner '{tok}'")))?;
                    let v = resolve_index(v_raw, positions.len(), line_num, "vertex")?;
                    let vt = match parts.next() {
                        Some("") | None => None,
                        Some(s) => {
                            let raw = s.parse::<i64>().map_err(|_| {
                                parse_err(line_num, format!("malformed face corner '{tok}'"))
                            })?;
                            Some(resolve_index(raw, texcoords.len(), line_num, "texcoord")?)
                        }
                    };
                    let vn = match parts.next() {
                        Some("") | None => None,
                        Some(s) => {
                            let raw = s.parse::<i64>().map_err(|_| {
                                parse_err(line_num, format!("malformed face corner '{tok}'"))
                            })?;
                            Some(resolve_index(raw, normals.len(), line_num, "normal")?)
                        }
                    };
                    corners.push(Corner { v, vt, vn });
                }
                match corners.len() {
                    3 => face_corners.push([corners[0], corners[1], corners[2]]),
                    4 => {
                        // Quad split along the v0-v2 diagonal.
                        face_corners.push([corners[0], corners[1], corners[2]]);
                        face_corners.push([corners[0], corners[2], corners[3]]);
                    }
                    n => {
                        return Err(parse_err(
                            line_num,
                            format!("face has {n} corners (only triangles and quads supported)"),
                        ))
                    }
                }
                if corners.iter().any(|c| c.vt.is_some()) {
                    any_vt = true;
                }
                if corners.iter().any(|c| c.vn.is_some()) {
                    any_vn = true;
                }
            }
            // Materials, groups, smoothing and object tags carry no geometry.
            _ => {}
        }
    }

    if face_corners.is_empty() {
        return Err(Error::EmptyMesh);
    }

    // Vertex split: one output vertex per distinct corner triple.
    let mut remap: HashMap<Corner, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut out_uv = Vec::new();
    let mut out_normals = Vec::new();
    let mut faces = Vec::with_capacity(face_corners.len());
    for fc in &face_corners {
        let mut f = [0u32; 3];
        for (slot, corner) in f.iter_mut().zip(fc) {
            let next_id = vertices.len() as u32;
            *slot = *remap.entry(*corner).or_insert_with(|| {
                vertices.push(positions[corner.v]);
                if any_vt {
                    out_uv.push(corner.vt.map(|i| texcoords[i]).unwrap_or_default());
                }
                if any_vn {
                    out_normals.push(corner.vn.map(|i| normals[i]).unwrap_or_default());
                }
                next_id
            });
        }
        faces.push(f);
    }

    let mut mesh = Mesh::new(vertices, faces);
    if any_vt {
        mesh.uv = Some(out_uv);
    }
    mesh.normalize_to_unit_cube();
    if any_vn {
        mesh.normals = Some(
            out_normals
                .into_iter()
                .map(|n| {
                    let len = n.norm();
                    if len > 1e-20 {
                        n / len
                    } else {
                        Vec3::new(0.0, 1.0, 0.0)
                    }
                })
                .collect(),
        );
    } else {
        mesh.compute_vertex_normals();
    }
    Ok(mesh)
}

/// Serialize a mesh as OBJ text. Used by debugging dumps and tests.
pub fn save_obj(mesh: &Mesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    if let Some(uv) = &mesh.uv {
        for t in uv {
            out.push_str(&format!("vt {} {}\n", t.x, t.y));
        }
    }
    if let Some(ns) = &mesh.normals {
        for n in ns {
            out.push_str(&format!("vn {} {} {}\n", n.x, n.y, n.z));
        }
    }
    let has_uv = mesh.uv.is_some();
    let has_n = mesh.normals.is_some();
    for f in &mesh.faces {
        let c = |i: u32| {
            let i = i + 1;
            match (has_uv, has_n) {
                (true, true) => format!("{i}/{i}/{i}"),
                (true, false) => format!("{i}/{i}"),
                (false, true) => format!("{i}//{i}"),
                (false, false) => format!("{i}"),
            }
        };
        out.push_str(&format!("f {} {} {}\n", c(f[0]), c(f[1]), c(f[2])));
    }
    out
}
