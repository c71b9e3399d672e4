//! Software rasterization of meshes into per-view buffers.
//!
//! Perspective projection with z-buffering, near-plane clipping and
//! perspective-correct attribute interpolation. Analysis buffers (depth,
//! normal, albedo) are not anti-aliased: every pixel holds the attributes of
//! the single nearest surface at its center. Depth is the camera-space
//! distance along the forward axis; uncovered pixels hold +inf.

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image2d::{Image, Mask};
use crate::material::{shade, LightConfig, PBRTextureSet};
use crate::math::{Vec2, Vec3};
use crate::mesh::Mesh;

/// Albedo used when rasterizing a mesh without materials.
pub const DEFAULT_ALBEDO: [f32; 3] = [0.7, 0.7, 0.7];
pub const DEFAULT_ROUGHNESS: f32 = 0.8;
pub const DEFAULT_METALNESS: f32 = 0.0;

/// One rendered view: the multi-channel image I_k of a camera.
#[derive(Debug, Clone)]
pub struct RenderedView {
    pub shaded: Image,
    pub albedo: Image,
    /// World-space unit normals in [-1,1]^3 where mask is set.
    pub normal: Image,
    /// Camera-space depth; +inf where mask is clear.
    pub depth: Image,
    pub mask: Mask,
    /// Optional (roughness, metalness) per pixel, carried when the material
    /// is known at render time so five-channel baking stays exact.
    pub material: Option<Image>,
}

impl RenderedView {
    pub fn resolution(&self) -> usize {
        self.mask.width()
    }
}

/// Geometry-only raster output: surface attributes per pixel.
#[derive(Debug, Clone)]
pub struct GBuffer {
    pub depth: Image,
    pub mask: Mask,
    pub position: Image,
    pub normal: Image,
    pub uv: Option<Image>,
}

impl GBuffer {
    pub fn resolution(&self) -> usize {
        self.mask.width()
    }
}

#[derive(Clone, Copy)]
struct ClipVertex {
    cam: Vec3,
    world: Vec3,
    normal: Vec3,
    uv: Vec2,
}

fn lerp_clip(a: &ClipVertex, b: &ClipVertex, t: f32) -> ClipVertex {
    ClipVertex {
        cam: a.cam + (b.cam - a.cam) * t,
        world: a.world + (b.world - a.world) * t,
        normal: a.normal + (b.normal - a.normal) * t,
        uv: a.uv + (b.uv - a.uv) * t,
    }
}

/// Clip a triangle against the z = near plane in camera space.
fn clip_near(tri: [ClipVertex; 3], near: f32) -> Vec<ClipVertex> {
    let mut out: Vec<ClipVertex> = Vec::with_capacity(4);
    for i in 0..3 {
        let cur = tri[i];
        let next = tri[(i + 1) % 3];
        let cur_in = cur.cam.z >= near;
        let next_in = next.cam.z >= near;
        if cur_in {
            out.push(cur);
        }
        if cur_in != next_in {
            let t = (near - cur.cam.z) / (next.cam.z - cur.cam.z);
            out.push(lerp_clip(&cur, &next, t));
        }
    }
    out
}

#[inline]
fn edge(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

#[inline]
fn accept(e: f64, a: [f64; 2], b: [f64; 2]) -> bool {
    if e > 0.0 {
        return true;
    }
    if e < 0.0 {
        return false;
    }
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    dy > 0.0 || (dy == 0.0 && dx > 0.0)
}

/// Rasterize surface attributes. Empty meshes yield an empty mask.
pub fn render_gbuffer(mesh: &Mesh, camera: &Camera) -> Result<GBuffer> {
    camera.validate()?;
    let res = camera.resolution as usize;
    let mut depth = Image::filled(res, res, 1, f32::INFINITY);
    let mut mask = Mask::new(res, res);
    let mut position = Image::new(res, res, 3);
    let mut normal = Image::new(res, res, 3);
    let has_uv = mesh.uv.is_some();
    let mut uv_buf = if has_uv {
        Some(Image::new(res, res, 2))
    } else {
        None
    };

    let owned_normals;
    let normals: &[Vec3] = match &mesh.normals {
        Some(n) => n,
        None => {
            let mut m = mesh.clone();
            m.compute_vertex_normals();
            owned_normals = m.normals.unwrap();
            &owned_normals
        }
    };

    let basis = camera.basis();
    let to_cam = |p: Vec3| -> Vec3 {
        let d = p - basis.origin;
        Vec3::new(d.dot(&basis.right), d.dot(&basis.up), d.dot(&basis.forward))
    };
    let focal = camera.focal_px() as f64;
    let half = res as f64 * 0.5;

    for face in &mesh.faces {
        let tri = [
            ClipVertex {
                cam: to_cam(mesh.vertices[face[0] as usize]),
                world: mesh.vertices[face[0] as usize],
                normal: normals[face[0] as usize],
                uv: mesh
                    .uv
                    .as_ref()
                    .map(|u| u[face[0] as usize])
                    .unwrap_or_default(),
            },
            ClipVertex {
                cam: to_cam(mesh.vertices[face[1] as usize]),
                world: mesh.vertices[face[1] as usize],
                normal: normals[face[1] as usize],
                uv: mesh
                    .uv
                    .as_ref()
                    .map(|u| u[face[1] as usize])
                    .unwrap_or_default(),
            },
            ClipVertex {
                cam: to_cam(mesh.vertices[face[2] as usize]),
                world: mesh.vertices[face[2] as usize],
                normal: normals[face[2] as usize],
                uv: mesh
                    .uv
                    .as_ref()
                    .map(|u| u[face[2] as usize])
                    .unwrap_or_default(),
            },
        ];
        let poly = clip_near(tri, camera.near);
        if poly.len() < 3 {
            continue;
        }
        for k in 1..poly.len() - 1 {
            raster_triangle(
                [&poly[0], &poly[k], &poly[k + 1]],
                focal,
                half,
                res,
                camera.far,
                &mut depth,
                &mut mask,
                &mut position,
                &mut normal,
                uv_buf.as_mut(),
            );
        }
    }

    Ok(GBuffer {
        depth,
        mask,
        position,
        normal,
        uv: uv_buf,
    })
}

#[allow(clippy::too_many_arguments)]
fn raster_triangle(
    v: [&ClipVertex; 3],
    focal: f64,
    half: f64,
    res: usize,
    far: f32,
    depth: &mut Image,
    mask: &mut Mask,
    position: &mut Image,
    normal: &mut Image,
    mut uv_buf: Option<&mut Image>,
) {
    let mut p = [[0.0f64; 2]; 3];
    for i in 0..3 {
        let z = v[i].cam.z as f64;
        p[i] = [
            half + focal * v[i].cam.x as f64 / z,
            half - focal * v[i].cam.y as f64 / z,
        ];
    }
    let mut vs = [v[0], v[1], v[2]];
    let area2 = edge(p[0], p[1], p[2]);
    if area2 == 0.0 {
        return;
    }
    if area2 < 0.0 {
        p.swap(1, 2);
        vs.swap(1, 2);
    }
    let area2 = edge(p[0], p[1], p[2]);

    let min_x = p.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min);
    let max_x = p.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max);
    let min_y = p.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min);
    let max_y = p.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max);
    if max_x < 0.0 || max_y < 0.0 || min_x >= res as f64 || min_y >= res as f64 {
        return;
    }
    let x0 = (min_x - 0.5).floor().max(0.0) as usize;
    let x1 = (((max_x - 0.5).ceil()) as i64).min(res as i64 - 1).max(0) as usize;
    let y0 = (min_y - 0.5).floor().max(0.0) as usize;
    let y1 = (((max_y - 0.5).ceil()) as i64).min(res as i64 - 1).max(0) as usize;

    let inv_zp = [1.0 / vs[0].cam.z, 1.0 / vs[1].cam.z, 1.0 / vs[2].cam.z];

    for y in y0..=y1 {
        let cy = y as f64 + 0.5;
        for x in x0..=x1 {
            let cx = x as f64 + 0.5;
            let e0 = edge(p[1], p[2], [cx, cy]);
            let e1 = edge(p[2], p[0], [cx, cy]);
            let e2 = edge(p[0], p[1], [cx, cy]);
            if !(accept(e0, p[1], p[2]) && accept(e1, p[2], p[0]) && accept(e2, p[0], p[1])) {
                continue;
            }
            let w0 = (e0 / area2) as f32;
            let w1 = (e1 / area2) as f32;
            let w2 = (e2 / area2) as f32;
            let denom = w0 * inv_zp[0] + w1 * inv_zp[1] + w2 * inv_zp[2];
            if denom <= 0.0 {
                continue;
            }
            let z = 1.0 / denom;
            if z > far {
                continue;
            }
            if z >= depth.get(x, y, 0) {
                continue;
            }
            // Perspective-correct weights in permuted slot order.
            let pw = [
                w0 * inv_zp[0] * z,
                w1 * inv_zp[1] * z,
                w2 * inv_zp[2] * z,
            ];
            let (va, vb, vc) = (vs[0], vs[1], vs[2]);
            let world = va.world * pw[0] + vb.world * pw[1] + vc.world * pw[2];
            let mut n = va.normal * pw[0] + vb.normal * pw[1] + vc.normal * pw[2];
            let len = n.norm();
            n = if len > 1e-12 {
                n / len
            } else {
                Vec3::new(0.0, 1.0, 0.0)
            };
            depth.set(x, y, 0, z);
            mask.set(x, y, true);
            position.set_pixel(x, y, &[world.x, world.y, world.z]);
            normal.set_pixel(x, y, &[n.x, n.y, n.z]);
            if let Some(uv_img) = uv_buf.as_deref_mut() {
                let uv = va.uv * pw[0] + vb.uv * pw[1] + vc.uv * pw[2];
                uv_img.set_pixel(x, y, &[uv.x, uv.y]);
            }
        }
    }
}

/// Per-pixel material lookup used by the shading pass.
#[derive(Debug, Clone, Copy)]
pub struct PbrSample {
    pub albedo: [f32; 3],
    pub roughness: f32,
    pub metalness: f32,
}

/// Shade a g-buffer into a full view, evaluating `sampler` at every covered
/// pixel. The albedo buffer bypasses lighting entirely.
pub fn shade_gbuffer(
    g: &GBuffer,
    camera: &Camera,
    light: &LightConfig,
    sampler: impl Fn(Vec3, Vec3, Option<Vec2>) -> PbrSample,
) -> RenderedView {
    let res = g.resolution();
    let mut shaded = Image::new(res, res, 3);
    let mut albedo = Image::new(res, res, 3);
    let mut material = Image::new(res, res, 2);
    let cam_pos = Vec3::from(camera.position);
    for y in 0..res {
        for x in 0..res {
            if !g.mask.get(x, y) {
                continue;
            }
            let pp = g.position.pixel(x, y);
            let np = g.normal.pixel(x, y);
            let world = Vec3::new(pp[0], pp[1], pp[2]);
            let n = Vec3::new(np[0], np[1], np[2]);
            let uv = g
                .uv
                .as_ref()
                .map(|img| Vec2::new(img.get(x, y, 0), img.get(x, y, 1)));
            let s = sampler(world, n, uv);
            let v = (cam_pos - world).normalize();
            let lit = shade(s.albedo, s.roughness, s.metalness, n, v, light);
            shaded.set_pixel(x, y, &lit);
            albedo.set_pixel(x, y, &s.albedo);
            material.set_pixel(x, y, &[s.roughness, s.metalness]);
        }
    }
    RenderedView {
        shaded,
        albedo,
        normal: g.normal.clone(),
        depth: g.depth.clone(),
        mask: g.mask.clone(),
        material: Some(material),
    }
}

/// Render one view of a mesh. With materials, the mesh must carry UVs; the
/// maps are sampled bilinearly. Without, a constant default material is
/// used (the albedo buffer is then exactly `DEFAULT_ALBEDO` on coverage).
pub fn rasterize(
    mesh: &Mesh,
    camera: &Camera,
    materials: Option<&PBRTextureSet>,
    light: &LightConfig,
) -> Result<RenderedView> {
    if materials.is_some() && mesh.uv.is_none() {
        return Err(Error::MissingUvs);
    }
    light.validate()?;
    let g = render_gbuffer(mesh, camera)?;
    let view = match materials {
        Some(set) => shade_gbuffer(&g, camera, light, |_, _, uv| {
            let uv = uv.expect("uv presence checked above");
            let (albedo, roughness, metalness) = set.sample(uv.x, uv.y);
            PbrSample {
                albedo,
                roughness,
                metalness,
            }
        }),
        None => shade_gbuffer(&g, camera, light, |_, _, _| PbrSample {
            albedo: DEFAULT_ALBEDO,
            roughness: DEFAULT_ROUGHNESS,
            metalness: DEFAULT_METALNESS,
        }),
    };
    Ok(view)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::canonical_cameras;
    use crate::math::{splitmix64, unit_f32};
    use crate::primitives;

    fn front_camera(res: u32) -> Camera {
        canonical_cameras(1, 0.0, 2.2, res, 40.0).unwrap()[0].clone()
    }

    #[test]
    fn cube_front_view_covers_centered_square() {
        let cube = primitives::unit_cube();
        let cam = front_camera(512);
        let view = rasterize(&cube, &cam, None, &LightConfig::default()).unwrap();
        // Analytic ray-box oracle: the front face (x = +0.5) spans
        // +-0.5 in y/z at depth 2.2 - 0.5 = 1.7; its projected half size is
        // focal * 0.5 / 1.7 pixels.
        let half_px = cam.focal_px() * 0.5 / 1.7;
        assert!(view.mask.get(256, 256));
        let inside = (half_px - 2.0) as usize;
        let outside = (half_px + 3.0) as usize;
        assert!(view.mask.get(256 - inside, 256));
        assert!(view.mask.get(256 + inside, 256));
        assert!(!view.mask.get(256 + outside, 256));
        assert!(!view.mask.get(256, 256 - outside));
        let d = view.depth.get(256, 256, 0);
        assert!((d - 1.7).abs() < 1e-4, "center depth {d}");
    }

    #[test]
    fn mesh_behind_far_plane_is_empty() {
        let mut cube = primitives::unit_cube();
        for v in &mut cube.vertices {
            v.x -= 150.0; // camera far plane is 100
        }
        let cam = front_camera(128);
        let view = rasterize(&cube, &cam, None, &LightConfig::default()).unwrap();
        assert_eq!(view.mask.count(), 0);
    }

    #[test]
    fn empty_mesh_yields_empty_mask() {
        let mesh = crate::mesh::Mesh::new(vec![], vec![]);
        let cam = front_camera(64);
        let view = rasterize(&mesh, &cam, None, &LightConfig::default()).unwrap();
        assert_eq!(view.mask.count(), 0);
    }

    #[test]
    fn albedo_buffer_bypasses_lighting() {
        let sphere = primitives::icosphere(3, 0.45);
        let cam = front_camera(128);
        let view = rasterize(&sphere, &cam, None, &LightConfig::default()).unwrap();
        assert!(view.mask.count() > 100);
        for y in 0..128 {
            for x in 0..128 {
                if view.mask.get(x, y) {
                    assert_eq!(view.albedo.pixel(x, y), &DEFAULT_ALBEDO);
                }
            }
        }
        // Changing the light leaves albedo bit-identical, shaded not.
        let other_light = LightConfig {
            direction: [0.0, 0.0, 1.0],
            intensity: [0.3, 0.9, 0.1],
            ambient: [0.0, 0.0, 0.0],
        };
        let view2 = rasterize(&sphere, &cam, None, &other_light).unwrap();
        assert_eq!(view.albedo.data(), view2.albedo.data());
        assert_ne!(view.shaded.data(), view2.shaded.data());
    }

    #[test]
    fn missing_uvs_with_materials_is_an_error() {
        let cube = primitives::unit_cube();
        let set = PBRTextureSet::constant(8, [1.0, 0.0, 0.0], 0.5, 0.0);
        let cam = front_camera(64);
        assert!(matches!(
            rasterize(&cube, &cam, Some(&set), &LightConfig::default()),
            Err(Error::MissingUvs)
        ));
    }

    #[test]
    fn nearer_triangle_wins_depth_test() {
        // Two camera-facing quads straddling the origin.
        use crate::math::Vec3;
        let mut verts = Vec::new();
        let mut faces = Vec::new();
        for (i, x) in [0.2f32, -0.2].iter().enumerate() {
            let b = (i * 4) as u32;
            verts.extend([
                Vec3::new(*x, -0.4, -0.4),
                Vec3::new(*x, -0.4, 0.4),
                Vec3::new(*x, 0.4, 0.4),
                Vec3::new(*x, 0.4, -0.4),
            ]);
            faces.push([b, b + 1, b + 2]);
            faces.push([b, b + 2, b + 3]);
        }
        let mesh = crate::mesh::Mesh::new(verts, faces);
        let cam = front_camera(128); // on +x axis, so x=0.2 is nearer
        let view = rasterize(&mesh, &cam, None, &LightConfig::default()).unwrap();
        let center = view.depth.get(64, 64, 0);
        assert!((center - 2.0).abs() < 1e-4, "nearest quad depth {center}");
    }

    #[test]
    fn determinism_bit_identical() {
        let sphere = primitives::icosphere(2, 0.4);
        let cam = front_camera(128);
        let a = rasterize(&sphere, &cam, None, &LightConfig::default()).unwrap();
        let b = rasterize(&sphere, &cam, None, &LightConfig::default()).unwrap();
        assert_eq!(a.shaded.data(), b.shaded.data());
        assert_eq!(a.depth.data(), b.depth.data());
        assert_eq!(a.mask.data(), b.mask.data());
    }

    #[test]
    fn projection_consistent_with_depth_buffer() {
        // Property from the module contract, sampled over >= 1000 surface
        // points: visible points match the depth buffer within delta_d.
        let sphere = primitives::icosphere(4, 0.42);
        let cams = canonical_cameras(3, 15.0, 2.2, 512, 40.0).unwrap();
        let mut normals_mesh = sphere.clone();
        normals_mesh.compute_vertex_normals();
        let mut tested = 0usize;
        for (ci, cam) in cams.iter().enumerate() {
            let g = render_gbuffer(&sphere, cam).unwrap();
            let cam_pos = Vec3::from(cam.position);
            for i in 0..1800u64 {
                let h = splitmix64(i * 31 + ci as u64 * 7919);
                let face = (splitmix64(h) % sphere.faces.len() as u64) as usize;
                let mut a = unit_f32(h);
                let mut b = unit_f32(splitmix64(h ^ 0xbeef));
                if a + b > 1.0 {
                    a = 1.0 - a;
                    b = 1.0 - b;
                }
                let f = sphere.faces[face];
                let p = sphere.vertices[f[0] as usize] * (1.0 - a - b)
                    + sphere.vertices[f[1] as usize] * a
                    + sphere.vertices[f[2] as usize] * b;
                // Only front-facing points can be visible.
                if p.normalize().dot(&(cam_pos - p).normalize()) < 0.3 {
                    continue;
                }
                let proj = cam.project(p);
                if !proj.in_frustum {
                    continue;
                }
                let (px, py) = (proj.pixel[0], proj.pixel[1]);
                // Skip pixels whose bilinear footprint touches background.
                let xi = px.floor() as usize;
                let yi = py.floor() as usize;
                let mut clean = true;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let (sx, sy) = ((xi + dx).min(511), (yi + dy).min(511));
                        if !g.mask.get(sx, sy) {
                            clean = false;
                        }
                    }
                }
                if !clean {
                    continue;
                }
                let mut d = [0.0f32];
                g.depth.sample_bilinear(px, py, &mut d);
                assert!(
                    (d[0] - proj.depth).abs() < 1e-3,
                    "depth mismatch {} vs {} at {px},{py}",
                    d[0],
                    proj.depth
                );
                tested += 1;
            }
        }
        assert!(tested >= 1000, "only {tested} points tested");
    }
}
