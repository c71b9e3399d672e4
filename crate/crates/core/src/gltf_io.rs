//! glTF 2.0 binary (GLB) export and a minimal reader for inspection.
//!
//! Exports a single mesh primitive with pbrMetallicRoughness materials:
//! baseColorTexture holds the albedo, metallicRoughnessTexture packs
//! roughness into G and metalness into B per the glTF convention. Textures
//! are embedded as PNG.

use serde_json::json;

use crate::error::{Error, Result};
use crate::image2d::Image;
use crate::material::PBRTextureSet;
use crate::math::{clamp01, Vec2, Vec3};
use crate::mesh::Mesh;

const GLB_MAGIC: u32 = 0x4654_6C67; // "glTF"
const CHUNK_JSON: u32 = 0x4E4F_534A;
const CHUNK_BIN: u32 = 0x004E_4942;

fn align4(buf: &mut Vec<u8>, pad: u8) {
    while buf.len() % 4 != 0 {
        buf.push(pad);
    }
}

fn image_to_rgb8(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.width() * img.height() * 3);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let p = img.pixel(x, y);
            for c in 0..3 {
                out.push((clamp01(p[c.min(img.channels() - 1)]) * 255.0).round() as u8);
            }
        }
    }
    out
}

fn encode_png_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    let img = image::RgbImage::from_raw(width as u32, height as u32, rgb.to_vec())
        .ok_or_else(|| Error::Gltf("PNG buffer size mismatch".into()))?;
    image::DynamicImage::ImageRgb8(img)
        .write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    Ok(bytes)
}

/// Serialize the mesh (and optional PBR maps) as a GLB document.
pub fn save_glb(mesh: &Mesh, materials: Option<&PBRTextureSet>) -> Result<Vec<u8>> {
    if materials.is_some() && mesh.uv.is_none() {
        return Err(Error::MissingUvs);
    }
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }

    let mut bin: Vec<u8> = Vec::new();
    let mut buffer_views = Vec::new();
    let mut accessors = Vec::new();

    let mut push_view = |bin: &mut Vec<u8>, data: &[u8]| -> usize {
        align4(bin, 0);
        let offset = bin.len();
        bin.extend_from_slice(data);
        buffer_views.push(json!({
            "buffer": 0,
            "byteOffset": offset,
            "byteLength": data.len(),
        }));
        buffer_views.len() - 1
    };

    // Positions with min/max, required by the spec for POSITION.
    let mut pos_bytes = Vec::with_capacity(mesh.vertices.len() * 12);
    let mut pmin = Vec3::repeat(f32::INFINITY);
    let mut pmax = Vec3::repeat(f32::NEG_INFINITY);
    for v in &mesh.vertices {
        pmin = pmin.inf(v);
        pmax = pmax.sup(v);
        for c in 0..3 {
            pos_bytes.extend_from_slice(&v[c].to_le_bytes());
        }
    }
    let pos_view = push_view(&mut bin, &pos_bytes);
    accessors.push(json!({
        "bufferView": pos_view,
        "componentType": 5126,
        "count": mesh.vertices.len(),
        "type": "VEC3",
        "min": [pmin.x, pmin.y, pmin.z],
        "max": [pmax.x, pmax.y, pmax.z],
    }));
    let pos_accessor = accessors.len() - 1;

    let mut attributes = serde_json::Map::new();
    attributes.insert("POSITION".into(), json!(pos_accessor));

    if let Some(normals) = &mesh.normals {
        let mut bytes = Vec::with_capacity(normals.len() * 12);
        for n in normals {
            for c in 0..3 {
                bytes.extend_from_slice(&n[c].to_le_bytes());
            }
        }
        let view = push_view(&mut bin, &bytes);
        accessors.push(json!({
            "bufferView": view,
            "componentType": 5126,
            "count": normals.len(),
            "type": "VEC3",
        }));
        attributes.insert("NORMAL".into(), json!(accessors.len() - 1));
    }

    if let Some(uvs) = &mesh.uv {
        let mut bytes = Vec::with_capacity(uvs.len() * 8);
        for t in uvs {
            bytes.extend_from_slice(&t.x.to_le_bytes());
            bytes.extend_from_slice(&t.y.to_le_bytes());
        }
        let view = push_view(&mut bin, &bytes);
        accessors.push(json!({
            "bufferView": view,
            "componentType": 5126,
            "count": uvs.len(),
            "type": "VEC2",
        }));
        attributes.insert("TEXCOORD_0".into(), json!(accessors.len() - 1));
    }

    let mut index_bytes = Vec::with_capacity(mesh.faces.len() * 12);
    for f in &mesh.faces {
        for &i in f {
            index_bytes.extend_from_slice(&i.to_le_bytes());
        }
    }
    let index_view = push_view(&mut bin, &index_bytes);
    accessors.push(json!({
        "bufferView": index_view,
        "componentType": 5125,
        "count": mesh.faces.len() * 3,
        "type": "SCALAR",
    }));
    let index_accessor = accessors.len() - 1;

    let mut images = Vec::new();
    let mut textures = Vec::new();
    let mut materials_json = Vec::new();
    if let Some(set) = materials {
        let res = set.resolution();
        let albedo_png = encode_png_rgb(res, res, &image_to_rgb8(&set.albedo))?;
        // R unused (occlusion slot), G roughness, B metalness.
        let mut mr = Vec::with_capacity(res * res * 3);
        for y in 0..res {
            for x in 0..res {
                mr.push(255u8);
                mr.push((clamp01(set.roughness.get(x, y, 0)) * 255.0).round() as u8);
                mr.push((clamp01(set.metalness.get(x, y, 0)) * 255.0).round() as u8);
            }
        }
        let mr_png = encode_png_rgb(res, res, &mr)?;
        for png in [albedo_png, mr_png] {
            let view = push_view(&mut bin, &png);
            images.push(json!({"bufferView": view, "mimeType": "image/png"}));
            textures.push(json!({"source": images.len() - 1, "sampler": 0}));
        }
        materials_json.push(json!({
            "pbrMetallicRoughness": {
                "baseColorTexture": {"index": 0},
                "metallicRoughnessTexture": {"index": 1},
                "metallicFactor": 1.0,
                "roughnessFactor": 1.0,
            },
            "doubleSided": false,
        }));
    }

    align4(&mut bin, 0);

    let mut primitive = serde_json::Map::new();
    primitive.insert("attributes".into(), serde_json::Value::Object(attributes));
    primitive.insert("indices".into(), json!(index_accessor));
    primitive.insert("mode".into(), json!(4));
    if materials.is_some() {
        primitive.insert("material".into(), json!(0));
    }

    let mut root = json!({
        "asset": {"version": "2.0", "generator": "gen3d"},
        "buffers": [{"byteLength": bin.len()}],
        "bufferViews": buffer_views,
        "accessors": accessors,
        "meshes": [{"primitives": [primitive]}],
        "nodes": [{"mesh": 0}],
        "scenes": [{"nodes": [0]}],
        "scene": 0,
    });
    if !images.is_empty() {
        root["images"] = json!(images);
        root["textures"] = json!(textures);
        root["materials"] = json!(materials_json);
        root["samplers"] = json!([{ "magFilter": 9729, "minFilter": 9729, "wrapS": 33071, "wrapT": 33071 }]);
    }

    let mut json_bytes = serde_json::to_vec(&root)?;
    align4(&mut json_bytes, b' ');

    let total = 12 + 8 + json_bytes.len() + 8 + bin.len();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&GLB_MAGIC.to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(total as u32).to_le_bytes());
    out.extend_from_slice(&(json_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&CHUNK_JSON.to_le_bytes());
    out.extend_from_slice(&json_bytes);
    out.extend_from_slice(&(bin.len() as u32).to_le_bytes());
    out.extend_from_slice(&CHUNK_BIN.to_le_bytes());
    out.extend_from_slice(&bin);
    Ok(out)
}

/// Minimal GLB reader: the first primitive's geometry plus decoded PBR
/// maps when present. Sufficient for inspection and round-trip checks.
pub fn load_glb(bytes: &[u8]) -> Result<(Mesh, Option<PBRTextureSet>)> {
    if bytes.len() < 12 || u32::from_le_bytes(bytes[0..4].try_into().unwrap()) != GLB_MAGIC {
        return Err(Error::Gltf("not a GLB document".into()));
    }
    let mut offset = 12;
    let mut json_chunk: Option<&[u8]> = None;
    let mut bin_chunk: Option<&[u8]> = None;
    while offset + 8 <= bytes.len() {
        let len = u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap()) as usize;
        let kind = u32::from_le_bytes(bytes[offset + 4..offset + 8].try_into().unwrap());
        let start = offset + 8;
        if start + len > bytes.len() {
            return Err(Error::Gltf("truncated chunk".into()));
        }
        match kind {
            CHUNK_JSON => json_chunk = Some(&bytes[start..start + len]),
            CHUNK_BIN => bin_chunk = Some(&bytes[start..start + len]),
            _ => {}
        }
        offset = start + len;
    }
    let root: serde_json::Value =
        serde_json::from_slice(json_chunk.ok_or_else(|| Error::Gltf("missing JSON chunk".into()))?)?;
    let bin = bin_chunk.unwrap_or(&[]);

    let view_bytes = |view_idx: u64| -> Result<&[u8]> {
        let view = root["bufferViews"]
            .get(view_idx as usize)
            .ok_or_else(|| Error::Gltf(format!("bufferView {view_idx} missing")))?;
        let off = view["byteOffset"].as_u64().unwrap_or(0) as usize;
        let len = view["byteLength"]
            .as_u64()
            .ok_or_else(|| Error::Gltf("bufferView without byteLength".into()))? as usize;
        bin.get(off..off + len)
            .ok_or_else(|| Error::Gltf("bufferView out of range".into()))
    };
    let accessor_data = |acc_idx: u64| -> Result<(&serde_json::Value, &[u8])> {
        let acc = root["accessors"]
            .get(acc_idx as usize)
            .ok_or_else(|| Error::Gltf(format!("accessor {acc_idx} missing")))?;
        let view = acc["bufferView"]
            .as_u64()
            .ok_or_else(|| Error::Gltf("accessor without bufferView".into()))?;
        let data = view_bytes(view)?;
        let off = acc["byteOffset"].as_u64().unwrap_or(0) as usize;
        Ok((acc, &data[off..]))
    };

    let prim = &root["meshes"][0]["primitives"][0];
    if prim.is_null() {
        return Err(Error::Gltf("no mesh primitive".into()));
    }

    let read_vec3 = |acc_idx: u64| -> Result<Vec<Vec3>> {
        let (acc, data) = accessor_data(acc_idx)?;
        let count = acc["count"].as_u64().unwrap_or(0) as usize;
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let b = &data[i * 12..i * 12 + 12];
            out.push(Vec3::new(
                f32::from_le_bytes(b[0..4].try_into().unwrap()),
                f32::from_le_bytes(b[4..8].try_into().unwrap()),
                f32::from_le_bytes(b[8..12].try_into().unwrap()),
            ));
        }
        Ok(out)
    };

    let pos_idx = prim["attributes"]["POSITION"]
        .as_u64()
        .ok_or_else(|| Error::Gltf("primitive without POSITION".into()))?;
    let vertices = read_vec3(pos_idx)?;
    let normals = match prim["attributes"]["NORMAL"].as_u64() {
        Some(i) => Some(read_vec3(i)?),
        None => None,
    };
    let uv = match prim["attributes"]["TEXCOORD_0"].as_u64() {
        Some(i) => {
            let (acc, data) = accessor_data(i)?;
            let count = acc["count"].as_u64().unwrap_or(0) as usize;
            let mut out = Vec::with_capacity(count);
            for k in 0..count {
                let b = &data[k * 8..k * 8 + 8];
                out.push(Vec2::new(
                    f32::from_le_bytes(b[0..4].try_into().unwrap()),
                    f32::from_le_bytes(b[4..8].try_into().unwrap()),
                ));
            }
            Some(out)
        }
        None => None,
    };

    let idx_accessor = prim["indices"]
        .as_u64()
        .ok_or_else(|| Error::Gltf("primitive without indices".into()))?;
    let (acc, data) = accessor_data(idx_accessor)?;
    let count = acc["count"].as_u64().unwrap_or(0) as usize;
    let comp = acc["componentType"].as_u64().unwrap_or(5125);
    let mut indices = Vec::with_capacity(count);
    for i in 0..count {
        let v = match comp {
            5123 => u16::from_le_bytes(data[i * 2..i * 2 + 2].try_into().unwrap()) as u32,
            5125 => u32::from_le_bytes(data[i * 4..i * 4 + 4].try_into().unwrap()),
            other => return Err(Error::Gltf(format!("unsupported index type {other}"))),
        };
        indices.push(v);
    }
    if indices.len() % 3 != 0 {
        return Err(Error::Gltf("index count not a multiple of 3".into()));
    }
    let faces: Vec<[u32; 3]> = indices.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();

    let mut mesh = Mesh::new(vertices, faces);
    mesh.normals = normals;
    mesh.uv = uv;

    let materials = match prim["material"].as_u64() {
        Some(mat_idx) => {
            let mat = &root["materials"][mat_idx as usize]["pbrMetallicRoughness"];
            let decode = |tex_ref: &serde_json::Value| -> Result<Option<image::RgbImage>> {
                let Some(tex_idx) = tex_ref["index"].as_u64() else {
                    return Ok(None);
                };
                let src = root["textures"][tex_idx as usize]["source"]
                    .as_u64()
                    .ok_or_else(|| Error::Gltf("texture without source".into()))?;
                let view = root["images"][src as usize]["bufferView"]
                    .as_u64()
                    .ok_or_else(|| Error::Gltf("image without bufferView".into()))?;
                let png = view_bytes(view)?;
                let img = image::load_from_memory(png)?.to_rgb8();
                Ok(Some(img))
            };
            let base = decode(&mat["baseColorTexture"])?;
            let mr = decode(&mat["metallicRoughnessTexture"])?;
            match base {
                Some(base) => {
                    let (w, h) = (base.width() as usize, base.height() as usize);
                    let mut albedo = Image::new(w, h, 3);
                    for y in 0..h {
                        for x in 0..w {
                            let p = base.get_pixel(x as u32, y as u32);
                            albedo.set_pixel(
                                x,
                                y,
                                &[
                                    p[0] as f32 / 255.0,
                                    p[1] as f32 / 255.0,
                                    p[2] as f32 / 255.0,
                                ],
                            );
                        }
                    }
                    let mut roughness = Image::filled(w, h, 1, 1.0);
                    let mut metalness = Image::new(w, h, 1);
                    if let Some(mr) = mr {
                        for y in 0..h.min(mr.height() as usize) {
                            for x in 0..w.min(mr.width() as usize) {
                                let p = mr.get_pixel(x as u32, y as u32);
                                roughness.set(x, y, 0, p[1] as f32 / 255.0);
                                metalness.set(x, y, 0, p[2] as f32 / 255.0);
                            }
                        }
                    }
                    Some(PBRTextureSet::new(albedo, roughness, metalness)?)
                }
                None => None,
            }
        }
        None => None,
    };

    Ok((mesh, materials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::generate_atlas;
    use crate::primitives;

    #[test]
    fn geometry_round_trip() {
        let mut sphere = primitives::icosphere(2, 0.45);
        sphere.compute_vertex_normals();
        let glb = save_glb(&sphere, None).unwrap();
        let (loaded, mats) = load_glb(&glb).unwrap();
        assert!(mats.is_none());
        assert_eq!(loaded.vertex_count(), sphere.vertex_count());
        assert_eq!(loaded.faces, sphere.faces);
        for (a, b) in loaded.vertices.iter().zip(&sphere.vertices) {
            assert!((a - b).norm() < 1e-5);
        }
    }

    #[test]
    fn constant_red_albedo_round_trips() {
        let (cube, _) = generate_atlas(primitives::unit_cube(), 45.0, 4).unwrap();
        let set = PBRTextureSet::constant(4, [1.0, 0.0, 0.0], 1.0, 0.0);
        let glb = save_glb(&cube, Some(&set)).unwrap();
        let (_, mats) = load_glb(&glb).unwrap();
        let mats = mats.expect("materials survive the round trip");
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(mats.albedo.pixel(x, y), &[1.0, 0.0, 0.0]);
                assert_eq!(mats.roughness.get(x, y, 0), 1.0);
                assert_eq!(mats.metalness.get(x, y, 0), 0.0);
            }
        }
    }

    #[test]
    fn materials_without_uvs_rejected() {
        let cube = primitives::unit_cube();
        let set = PBRTextureSet::constant(4, [1.0, 0.0, 0.0], 1.0, 0.0);
        assert!(matches!(save_glb(&cube, Some(&set)), Err(Error::MissingUvs)));
    }

    #[test]
    fn output_is_byte_deterministic() {
        let (cube, _) = generate_atlas(primitives::unit_cube(), 45.0, 4).unwrap();
        let set = PBRTextureSet::constant(8, [0.2, 0.5, 0.9], 0.4, 0.1);
        let a = save_glb(&cube, Some(&set)).unwrap();
        let b = save_glb(&cube, Some(&set)).unwrap();
        assert_eq!(a, b);
    }
}
