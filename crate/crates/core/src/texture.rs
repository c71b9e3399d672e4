//! UV-space texture machinery: view-to-texture re-projection (baking),
//! partial-texture fusion, pull-push hole filling and classical
//! super-resolution.

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image2d::{Image, Mask};
use crate::math::{Vec2, Vec3};
use crate::mesh::Mesh;
use crate::raster::RenderedView;
use crate::uvrast::for_each_covered_texel;

/// UV-space texture: an L x L image with 3 channels (shaded RGB) or 5
/// channels (albedo RGB + roughness + metalness) plus a coverage mask.
/// L must be a power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    pixels: Image,
    coverage: Mask,
}

impl Texture {
    pub fn new(pixels: Image, coverage: Mask) -> Result<Self> {
        if pixels.width() != pixels.height() || !pixels.width().is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "texture must be square with power-of-two size, got {}x{}",
                pixels.width(),
                pixels.height()
            )));
        }
        if pixels.channels() != 3 && pixels.channels() != 5 {
            return Err(Error::InvalidArgument(format!(
                "texture must have 3 or 5 channels, got {}",
                pixels.channels()
            )));
        }
        if coverage.width() != pixels.width() || coverage.height() != pixels.height() {
            return Err(Error::ShapeMismatch("coverage mask size mismatch".into()));
        }
        Ok(Self { pixels, coverage })
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    pub fn channels(&self) -> usize {
        self.pixels.channels()
    }

    pub fn pixels(&self) -> &Image {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut Image {
        &mut self.pixels
    }

    pub fn coverage(&self) -> &Mask {
        &self.coverage
    }

    pub fn coverage_mut(&mut self) -> &mut Mask {
        &mut self.coverage
    }
}

/// UV-space image holding the texels visible from one view, with per-texel
/// confidence in [0,1]. Confidence 0 marks texels with no valid sample.
#[derive(Debug, Clone)]
pub struct PartialTexture {
    pub pixels: Image,
    pub confidence: Image,
    pub source_view: usize,
}

impl PartialTexture {
    pub fn resolution(&self) -> usize {
        self.pixels.width()
    }

    pub fn channels(&self) -> usize {
        self.pixels.channels()
    }
}

/// Per-texel surface attributes obtained by rasterizing the mesh in UV
/// space. Built once per (mesh, resolution) and reused across views; also
/// provides the chart-interior mask consumed by hole filling.
#[derive(Debug, Clone)]
pub struct TexelSurfaceMap {
    resolution: usize,
    pub mask: Mask,
    pub position: Image,
    pub normal: Image,
}

impl TexelSurfaceMap {
    pub fn build(mesh: &Mesh, resolution: usize) -> Result<Self> {
        let uvs = mesh.uv.as_ref().ok_or(Error::MissingUvs)?;
        if !resolution.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "texture resolution {resolution} is not a power of two"
            )));
        }
        let normals = match &mesh.normals {
            Some(n) => n.clone(),
            None => {
                let mut m = mesh.clone();
                m.compute_vertex_normals();
                m.normals.unwrap()
            }
        };
        let mut mask = Mask::new(resolution, resolution);
        let mut position = Image::new(resolution, resolution, 3);
        let mut normal = Image::new(resolution, resolution, 3);
        let scale = resolution as f32;
        for face in &mesh.faces {
            let tri = [
                [uvs[face[0] as usize].x * scale, uvs[face[0] as usize].y * scale],
                [uvs[face[1] as usize].x * scale, uvs[face[1] as usize].y * scale],
                [uvs[face[2] as usize].x * scale, uvs[face[2] as usize].y * scale],
            ];
            let pv = [
                mesh.vertices[face[0] as usize],
                mesh.vertices[face[1] as usize],
                mesh.vertices[face[2] as usize],
            ];
            let nv = [
                normals[face[0] as usize],
                normals[face[1] as usize],
                normals[face[2] as usize],
            ];
            for_each_covered_texel(tri, resolution, |x, y, b| {
                let p = pv[0] * b[0] + pv[1] * b[1] + pv[2] * b[2];
                let mut n = nv[0] * b[0] + nv[1] * b[1] + nv[2] * b[2];
                let len = n.norm();
                n = if len > 1e-12 {
                    n / len
                } else {
                    Vec3::new(0.0, 1.0, 0.0)
                };
                mask.set(x, y, true);
                position.set_pixel(x, y, &[p.x, p.y, p.z]);
                normal.set_pixel(x, y, &[n.x, n.y, n.z]);
            });
        }
        Ok(Self {
            resolution,
            mask,
            position,
            normal,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }
}

/// Which view channels to re-project.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BakeChannels {
    /// Albedo, extended with (roughness, metalness) when the view carries a
    /// material buffer: 5-channel partials.
    Albedo,
    /// Shaded RGB with baked lighting: 3-channel partials.
    Shaded,
}

#[derive(Debug, Clone, Copy)]
pub struct BakeParams {
    /// Visibility tolerance on |projected depth - view depth|.
    pub delta_d: f32,
    /// Confidence exponent: confidence = max(0, n.v)^p.
    pub confidence_exponent: f32,
    pub channels: BakeChannels,
}

impl Default for BakeParams {
    fn default() -> Self {
        Self {
            delta_d: 1e-3,
            confidence_exponent: 2.0,
            channels: BakeChannels::Albedo,
        }
    }
}

/// Re-project one view into UV space. For every texel inside a chart, the
/// interpolated surface point is projected into the camera; the sample is
/// accepted iff it lands in the frustum on a masked pixel whose depth
/// (sampled bilinearly) matches the projected depth within `delta_d`.
/// Accepted texels bilinearly sample the view's color channels and get
/// confidence max(0, n.v)^p; rejected texels keep confidence 0.
pub fn bake_view_to_partial(
    mesh: &Mesh,
    view: &RenderedView,
    camera: &Camera,
    resolution: usize,
    source_view: usize,
    params: &BakeParams,
) -> Result<PartialTexture> {
    let map = TexelSurfaceMap::build(mesh, resolution)?;
    bake_with_map(&map, view, camera, source_view, params)
}

/// Baking core against a prebuilt surface map.
pub fn bake_with_map(
    map: &TexelSurfaceMap,
    view: &RenderedView,
    camera: &Camera,
    source_view: usize,
    params: &BakeParams,
) -> Result<PartialTexture> {
    let res = map.resolution;
    let channels = match params.channels {
        BakeChannels::Albedo => {
            if view.material.is_some() {
                5
            } else {
                3
            }
        }
        BakeChannels::Shaded => 3,
    };
    let mut pixels = Image::new(res, res, channels);
    let mut confidence = Image::new(res, res, 1);
    let cam_pos = Vec3::from(camera.position);
    let view_res = view.resolution();

    use rayon::prelude::*;
    let rows: Vec<(Vec<f32>, Vec<f32>)> = (0..res)
        .into_par_iter()
        .map(|y| {
            let mut row_px = vec![0.0f32; res * channels];
            let mut row_conf = vec![0.0f32; res];
            let mut color3 = [0.0f32; 3];
            let mut mat2 = [0.0f32; 2];
            let mut dsample = [0.0f32];
            for x in 0..res {
                if !map.mask.get(x, y) {
                    continue;
                }
                let pp = map.position.pixel(x, y);
                let np = map.normal.pixel(x, y);
                let p = Vec3::new(pp[0], pp[1], pp[2]);
                let n = Vec3::new(np[0], np[1], np[2]);
                let proj = camera.project(p);
                if !proj.in_frustum {
                    continue;
                }
                let (px, py) = (proj.pixel[0], proj.pixel[1]);
                let xi = (px.floor() as usize).min(view_res - 1);
                let yi = (py.floor() as usize).min(view_res - 1);
                if !view.mask.get(xi, yi) {
                    continue;
                }
                view.depth.sample_bilinear(px, py, &mut dsample);
                if !((dsample[0] - proj.depth).abs() < params.delta_d) {
                    continue;
                }
                let v = (cam_pos - p).normalize();
                let conf = n.dot(&v).max(0.0).powf(params.confidence_exponent);
                let src = match params.channels {
                    BakeChannels::Albedo => &view.albedo,
                    BakeChannels::Shaded => &view.shaded,
                };
                src.sample_bilinear(px, py, &mut color3);
                let o = x * channels;
                row_px[o..o + 3].copy_from_slice(&color3);
                if channels == 5 {
                    view.material
                        .as_ref()
                        .expect("5 channels imply material buffer")
                        .sample_bilinear(px, py, &mut mat2);
                    row_px[o + 3] = mat2[0];
                    row_px[o + 4] = mat2[1];
                }
                row_conf[x] = conf;
            }
            (row_px, row_conf)
        })
        .collect();

    for (y, (row_px, row_conf)) in rows.into_iter().enumerate() {
        let start = pixels.index(0, y);
        pixels.data_mut()[start..start + res * channels].copy_from_slice(&row_px);
        let cstart = confidence.index(0, y);
        confidence.data_mut()[cstart..cstart + res].copy_from_slice(&row_conf);
    }

    Ok(PartialTexture {
        pixels,
        confidence,
        source_view,
    })
}

/// Fuse partial textures by per-texel confidence-weighted averaging.
///
/// Partials are summed in ascending `source_view` order, making the result
/// invariant to the order of the input list. Per texel and channel:
///
/// ```text
/// acc += w_k * pixel_k;  wsum += w_k      for every partial with w_k >= floor (w_k > 0)
/// fused = acc / wsum                       when wsum > 0, else uncovered
/// ```
pub fn fuse_partials(partials: &[PartialTexture], floor: f32) -> Result<Texture> {
    let first = partials
        .first()
        .ok_or_else(|| Error::InvalidArgument("fuse_partials needs at least one partial".into()))?;
    let res = first.resolution();
    let channels = first.channels();
    for p in partials {
        if p.resolution() != res || p.channels() != channels {
            return Err(Error::ShapeMismatch(format!(
                "partial {} has shape {}x{} vs expected {}x{}",
                p.source_view,
                p.resolution(),
                p.channels(),
                res,
                channels
            )));
        }
    }
    let mut order: Vec<usize> = (0..partials.len()).collect();
    order.sort_by_key(|&i| partials[i].source_view);

    let mut pixels = Image::new(res, res, channels);
    let mut coverage = Mask::new(res, res);
    let mut acc = vec![0.0f32; channels];
    for y in 0..res {
        for x in 0..res {
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut wsum = 0.0f32;
            for &i in &order {
                let w = partials[i].confidence.get(x, y, 0);
                if w >= floor && w > 0.0 {
                    let px = partials[i].pixels.pixel(x, y);
                    for c in 0..channels {
                        acc[c] += w * px[c];
                    }
                    wsum += w;
                }
            }
            if wsum > 0.0 {
                let out = pixels.pixel_mut(x, y);
                for c in 0..channels {
                    out[c] = acc[c] / wsum;
                }
                coverage.set(x, y, true);
            }
        }
    }
    Texture::new(pixels, coverage)
}

/// Pull-push hole filling.
///
/// Covered texels pass through bit-exactly. Uncovered texels inside
/// `chart_mask` are filled from a coverage-weighted mip pyramid (pull:
/// weighted average of covered children, weight saturating at 1; push:
/// bilinear upsample blended by local weight). Texels outside all charts
/// within `padding` texels of a chart are filled by ring dilation; the rest
/// get the mean of all covered texels. The output coverage equals
/// `chart_mask`.
pub fn fill_holes(texture: &Texture, chart_mask: &Mask, padding: usize) -> Result<Texture> {
    let res = texture.width();
    if chart_mask.width() != res || chart_mask.height() != res {
        return Err(Error::ShapeMismatch("chart mask size mismatch".into()));
    }
    if !texture.coverage().any() {
        return Err(Error::ZeroCoverage);
    }
    let channels = texture.channels();

    // Neutral value: per-channel mean of covered texels, which keeps every
    // output inside the covered value range.
    let mut neutral = vec![0.0f64; channels];
    let mut covered_count = 0usize;
    for y in 0..res {
        for x in 0..res {
            if texture.coverage().get(x, y) {
                let p = texture.pixels().pixel(x, y);
                for c in 0..channels {
                    neutral[c] += p[c] as f64;
                }
                covered_count += 1;
            }
        }
    }
    let neutral: Vec<f32> = neutral
        .iter()
        .map(|&s| (s / covered_count as f64) as f32)
        .collect();

    // Pull: coarser levels hold (weighted color, weight min 1).
    let levels = res.trailing_zeros() as usize + 1;
    let mut colors: Vec<Image> = Vec::with_capacity(levels);
    let mut weights: Vec<Image> = Vec::with_capacity(levels);
    let mut base_w = Image::new(res, res, 1);
    for y in 0..res {
        for x in 0..res {
            if texture.coverage().get(x, y) {
                base_w.set(x, y, 0, 1.0);
            }
        }
    }
    colors.push(texture.pixels().clone());
    weights.push(base_w);
    for level in 1..levels {
        let size = res >> level;
        let mut c_img = Image::new(size, size, channels);
        let mut w_img = Image::new(size, size, 1);
        let (pc, pw) = (&colors[level - 1], &weights[level - 1]);
        for y in 0..size {
            for x in 0..size {
                let mut acc = vec![0.0f32; channels];
                let mut wsum = 0.0f32;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let w = pw.get(x * 2 + dx, y * 2 + dy, 0);
                        if w > 0.0 {
                            let p = pc.pixel(x * 2 + dx, y * 2 + dy);
                            for ch in 0..channels {
                                acc[ch] += w * p[ch];
                            }
                            wsum += w;
                        }
                    }
                }
                if wsum > 0.0 {
                    let out = c_img.pixel_mut(x, y);
                    for ch in 0..channels {
                        out[ch] = acc[ch] / wsum;
                    }
                    w_img.set(x, y, 0, wsum.min(1.0));
                }
            }
        }
        colors.push(c_img);
        weights.push(w_img);
    }

    // Push: blend each level with the bilinear upsample of the coarser one.
    for level in (0..levels - 1).rev() {
        let size = res >> level;
        let coarse = colors[level + 1].clone();
        let c_img = &mut colors[level];
        let w_img = &weights[level];
        let mut up = vec![0.0f32; channels];
        for y in 0..size {
            for x in 0..size {
                let w = w_img.get(x, y, 0);
                if w >= 1.0 {
                    continue;
                }
                coarse.sample_bilinear(
                    (x as f32 + 0.5) * 0.5,
                    (y as f32 + 0.5) * 0.5,
                    &mut up,
                );
                let out = c_img.pixel_mut(x, y);
                for ch in 0..channels {
                    out[ch] = w * out[ch] + (1.0 - w) * up[ch];
                }
            }
        }
    }

    // Compose: originals bit-exact, in-chart holes from the pyramid.
    let mut out = texture.pixels().clone();
    let filled = &colors[0];
    for y in 0..res {
        for x in 0..res {
            if !texture.coverage().get(x, y) && chart_mask.get(x, y) {
                let src = filled.pixel(x, y).to_vec();
                out.set_pixel(x, y, &src);
            }
        }
    }

    // Gutter dilation: grow chart colors outward ring by ring.
    let mut done = chart_mask.clone();
    for y in 0..res {
        for x in 0..res {
            if texture.coverage().get(x, y) {
                done.set(x, y, true);
            }
        }
    }
    for _ in 0..padding {
        let snapshot = out.clone();
        let done_snap = done.clone();
        let mut next_done = done.clone();
        for y in 0..res {
            for x in 0..res {
                if done_snap.get(x, y) {
                    continue;
                }
                let mut acc = vec![0.0f32; channels];
                let mut count = 0u32;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= res as i64 || ny >= res as i64 {
                            continue;
                        }
                        if done_snap.get(nx as usize, ny as usize) {
                            let p = snapshot.pixel(nx as usize, ny as usize);
                            for c in 0..channels {
                                acc[c] += p[c];
                            }
                            count += 1;
                        }
                    }
                }
                if count > 0 {
                    let px = out.pixel_mut(x, y);
                    for c in 0..channels {
                        px[c] = acc[c] / count as f32;
                    }
                    next_done.set(x, y, true);
                }
            }
        }
        done = next_done;
    }

    // Remaining texels outside any chart: neutral.
    for y in 0..res {
        for x in 0..res {
            if !done.get(x, y) {
                out.set_pixel(x, y, &neutral);
            }
        }
    }

    Texture::new(out, chart_mask.clone())
}

/// Lanczos-3 kernel: sinc(t) * sinc(t/3) for |t| < 3, with sinc(t) =
/// sin(pi t)/(pi t). Weights over the 6-tap footprint are normalized to
/// sum to 1 per output pixel.
fn lanczos3(t: f32) -> f32 {
    let t = t.abs();
    if t < 1e-7 {
        return 1.0;
    }
    if t >= 3.0 {
        return 0.0;
    }
    let pt = std::f32::consts::PI * t;
    let pt3 = pt / 3.0;
    (pt.sin() / pt) * (pt3.sin() / pt3)
}

fn resample_axis(src: &Image, factor: usize, horizontal: bool) -> Image {
    let (w, h) = (src.width(), src.height());
    let (ow, oh) = if horizontal { (w * factor, h) } else { (w, h * factor) };
    let channels = src.channels();
    let mut out = Image::new(ow, oh, channels);

    // Integer upscale: tap weights depend only on the output phase.
    let mut phase_weights: Vec<(i64, Vec<f32>)> = Vec::with_capacity(factor);
    for phase in 0..factor {
        let src_coord = (phase as f32 + 0.5) / factor as f32 - 0.5;
        let start = (src_coord - 3.0).ceil() as i64;
        let end = (src_coord + 3.0).floor() as i64;
        let mut ws: Vec<f32> = (start..=end)
            .map(|i| lanczos3(src_coord - i as f32))
            .collect();
        let sum: f32 = ws.iter().sum();
        ws.iter_mut().for_each(|w| *w /= sum);
        phase_weights.push((start, ws));
    }

    for oy in 0..oh {
        for ox in 0..ow {
            let (pos, axis_len, phase_src) = if horizontal {
                (ox, w, ox)
            } else {
                (oy, h, oy)
            };
            let base = (pos / factor) as i64;
            let (start, ws) = &phase_weights[phase_src % factor];
            let out_px = {
                let mut acc = vec![0.0f32; channels];
                for (k, &wgt) in ws.iter().enumerate() {
                    let tap = (base + start + k as i64).clamp(0, axis_len as i64 - 1) as usize;
                    let p = if horizontal {
                        src.pixel(tap, oy)
                    } else {
                        src.pixel(ox, tap)
                    };
                    for c in 0..channels {
                        acc[c] += wgt * p[c];
                    }
                }
                acc
            };
            out.set_pixel(ox, oy, &out_px);
        }
    }
    out
}

/// Lanczos-3 super-resolution by an integer factor in {2, 4}, up to 4096.
/// The coverage mask is upscaled by nearest neighbor; values are clamped
/// to [0,1].
pub fn upscale(texture: &Texture, factor: usize) -> Result<Texture> {
    if factor != 2 && factor != 4 {
        return Err(Error::InvalidArgument(format!(
            "upscale factor must be 2 or 4, got {factor}"
        )));
    }
    let res = texture.width();
    if res * factor > 4096 {
        return Err(Error::InvalidArgument(format!(
            "upscaled size {} exceeds 4096",
            res * factor
        )));
    }
    let horizontal = resample_axis(texture.pixels(), factor, true);
    let mut full = resample_axis(&horizontal, factor, false);
    for v in full.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    let mut coverage = Mask::new(res * factor, res * factor);
    for y in 0..res * factor {
        for x in 0..res * factor {
            coverage.set(x, y, texture.coverage().get(x / factor, y / factor));
        }
    }
    Texture::new(full, coverage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::generate_atlas;
    use crate::camera::canonical_cameras;
    use crate::material::{LightConfig, PBRTextureSet};
    use crate::mesh::Mesh;
    use crate::primitives;
    use crate::raster::rasterize;

    fn quad_with_uvs(half: f32, x: f32) -> Mesh {
        // Wound so the normal faces +x, toward the azimuth-0 camera.
        let mut m = Mesh::new(
            vec![
                Vec3::new(x, -half, -half),
                Vec3::new(x, half, -half),
                Vec3::new(x, half, half),
                Vec3::new(x, -half, half),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        );
        m.uv = Some(vec![
            Vec2::new(0.05, 0.95),
            Vec2::new(0.05, 0.05),
            Vec2::new(0.95, 0.05),
            Vec2::new(0.95, 0.95),
        ]);
        m.compute_vertex_normals();
        m
    }

    #[test]
    fn camera_facing_quad_bakes_red_with_full_confidence() {
        // Small quad far from the camera: n.v stays within 1e-3 of 1.
        let mesh = quad_with_uvs(0.02, 0.0);
        let cam = canonical_cameras(1, 0.0, 2.2, 256, 40.0).unwrap()[0].clone();
        let set = PBRTextureSet::constant(16, [1.0, 0.0, 0.0], 0.5, 0.0);
        let view = rasterize(&mesh, &cam, Some(&set), &LightConfig::default()).unwrap();
        let partial =
            bake_view_to_partial(&mesh, &view, &cam, 64, 0, &BakeParams::default()).unwrap();
        let mut covered = 0;
        for y in 0..64 {
            for x in 0..64 {
                let conf = partial.confidence.get(x, y, 0);
                if conf > 0.0 {
                    covered += 1;
                    assert!((conf - 1.0).abs() < 1e-3, "confidence {conf}");
                    let px = partial.pixels.pixel(x, y);
                    assert!((px[0] - 1.0).abs() < 1e-4);
                    assert!(px[1].abs() < 1e-4);
                }
            }
        }
        assert!(covered > 1000, "covered {covered}");
    }

    #[test]
    fn occluded_chart_gets_zero_confidence() {
        // Cube baked from a single front camera: the -x face projects onto
        // pixels owned by the +x face and must fail the depth test.
        let (cube, _charts) = generate_atlas(primitives::unit_cube(), 45.0, 4).unwrap();
        let cam = canonical_cameras(1, 0.0, 2.2, 512, 40.0).unwrap()[0].clone();
        let view = rasterize(&cube, &cam, None, &LightConfig::default()).unwrap();
        let partial =
            bake_view_to_partial(&cube, &view, &cam, 256, 0, &BakeParams::default()).unwrap();
        let map = TexelSurfaceMap::build(&cube, 256).unwrap();
        let mut back_texels = 0usize;
        for y in 0..256 {
            for x in 0..256 {
                if !map.mask.get(x, y) {
                    continue;
                }
                if map.position.get(x, y, 0) < -0.49 {
                    back_texels += 1;
                    assert_eq!(
                        partial.confidence.get(x, y, 0),
                        0.0,
                        "back-face texel visible at {x},{y}"
                    );
                }
            }
        }
        assert!(back_texels > 500, "back texels {back_texels}");
    }

    #[test]
    fn sphere_confidence_follows_cos_squared() {
        // Per-texel analytic normal oracle for the default exponent p=2.
        let (sphere, _) = generate_atlas(primitives::icosphere(3, 0.4), 30.0, 4).unwrap();
        let cam = canonical_cameras(1, 0.0, 2.2, 512, 40.0).unwrap()[0].clone();
        let view = rasterize(&sphere, &cam, None, &LightConfig::default()).unwrap();
        let partial =
            bake_view_to_partial(&sphere, &view, &cam, 256, 0, &BakeParams::default()).unwrap();
        let map = TexelSurfaceMap::build(&sphere, 256).unwrap();
        let cam_pos = Vec3::from(cam.position);
        let mut checked = 0usize;
        for y in 0..256 {
            for x in 0..256 {
                let conf = partial.confidence.get(x, y, 0);
                if conf <= 0.05 {
                    continue;
                }
                let pp = map.position.pixel(x, y);
                let p = Vec3::new(pp[0], pp[1], pp[2]);
                // Analytic sphere normal, not the interpolated one.
                let n = p.normalize();
                let v = (cam_pos - p).normalize();
                let expect = n.dot(&v).max(0.0).powi(2);
                assert!(
                    (conf - expect).abs() < 0.02,
                    "conf {conf} vs cos^2 {expect}"
                );
                checked += 1;
            }
        }
        assert!(checked > 3000, "checked {checked}");
    }

    #[test]
    fn fuse_single_partial_is_identity() {
        let mut px = Image::new(4, 4, 3);
        let mut conf = Image::new(4, 4, 1);
        for y in 0..4 {
            for x in 0..4 {
                px.set_pixel(x, y, &[x as f32 / 3.0, y as f32 / 3.0, 0.25]);
                conf.set(x, y, 0, if x == 0 { 0.0 } else { 0.8 });
            }
        }
        let p = PartialTexture {
            pixels: px.clone(),
            confidence: conf,
            source_view: 0,
        };
        let fused = fuse_partials(std::slice::from_ref(&p), 0.1).unwrap();
        for y in 0..4 {
            for x in 1..4 {
                assert!(fused.coverage().get(x, y));
                assert_eq!(fused.pixels().pixel(x, y), px.pixel(x, y));
            }
            assert!(!fused.coverage().get(0, y));
        }
    }

    #[test]
    fn fuse_equal_weights_averages() {
        let mk = |color: f32, view| PartialTexture {
            pixels: Image::filled(2, 2, 3, color),
            confidence: Image::filled(2, 2, 1, 1.0),
            source_view: view,
        };
        let fused = fuse_partials(&[mk(0.2, 0), mk(0.6, 1)], 0.1).unwrap();
        for v in fused.pixels().data() {
            assert!((v - 0.4).abs() < 1e-7);
        }
    }

    #[test]
    fn fuse_is_permutation_invariant() {
        let mk = |seed: u64, view: usize| {
            let mut px = Image::new(8, 8, 3);
            let mut conf = Image::new(8, 8, 1);
            for i in 0..64 {
                let h = crate::math::splitmix64(seed * 977 + i);
                let x = (i % 8) as usize;
                let y = (i / 8) as usize;
                px.set_pixel(
                    x,
                    y,
                    &[
                        crate::math::unit_f32(h),
                        crate::math::unit_f32(crate::math::splitmix64(h)),
                        0.5,
                    ],
                );
                conf.set(x, y, 0, crate::math::unit_f32(h ^ 0xff));
            }
            PartialTexture {
                pixels: px,
                confidence: conf,
                source_view: view,
            }
        };
        let parts = vec![mk(1, 0), mk(2, 1), mk(3, 2), mk(4, 3)];
        let a = fuse_partials(&parts, 0.1).unwrap();
        let mut shuffled = vec![
            parts[2].clone(),
            parts[0].clone(),
            parts[3].clone(),
            parts[1].clone(),
        ];
        let b = fuse_partials(&shuffled, 0.1).unwrap();
        assert_eq!(a.pixels().data(), b.pixels().data());
        shuffled.reverse();
        let c = fuse_partials(&shuffled, 0.1).unwrap();
        assert_eq!(a.pixels().data(), c.pixels().data());
    }

    #[test]
    fn fuse_rejects_mismatched_shapes() {
        let a = PartialTexture {
            pixels: Image::new(4, 4, 3),
            confidence: Image::new(4, 4, 1),
            source_view: 0,
        };
        let b = PartialTexture {
            pixels: Image::new(8, 8, 3),
            confidence: Image::new(8, 8, 1),
            source_view: 1,
        };
        assert!(fuse_partials(&[a, b], 0.1).is_err());
        assert!(fuse_partials(&[], 0.1).is_err());
    }

    #[test]
    fn fill_holes_noop_on_full_coverage() {
        let mut px = Image::new(8, 8, 3);
        for (i, v) in px.data_mut().iter_mut().enumerate() {
            *v = (i % 17) as f32 / 16.0;
        }
        let tex = Texture::new(px.clone(), Mask::filled(8, 8, true)).unwrap();
        let filled = fill_holes(&tex, &Mask::filled(8, 8, true), 4).unwrap();
        assert_eq!(filled.pixels().data(), px.data());
    }

    #[test]
    fn fill_holes_single_texel_floods_charts() {
        let mut px = Image::new(16, 16, 3);
        px.set_pixel(5, 7, &[0.3, 0.6, 0.9]);
        let mut cov = Mask::new(16, 16);
        cov.set(5, 7, true);
        let tex = Texture::new(px, cov).unwrap();
        let chart = Mask::filled(16, 16, true);
        let filled = fill_holes(&tex, &chart, 2).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                let p = filled.pixels().pixel(x, y);
                assert_eq!(p, &[0.3, 0.6, 0.9], "texel {x},{y}");
            }
        }
    }

    #[test]
    fn fill_holes_values_stay_in_covered_range() {
        // Half-covered gradient; brute-force min/max check on the output.
        let res = 32;
        let mut px = Image::new(res, res, 3);
        let mut cov = Mask::new(res, res);
        let mut lo = [f32::INFINITY; 3];
        let mut hi = [f32::NEG_INFINITY; 3];
        for y in 0..res {
            for x in 0..res / 2 {
                let v = [
                    x as f32 / res as f32,
                    y as f32 / res as f32,
                    0.2 + 0.01 * (x + y) as f32,
                ];
                px.set_pixel(x, y, &v);
                cov.set(x, y, true);
                for c in 0..3 {
                    lo[c] = lo[c].min(v[c]);
                    hi[c] = hi[c].max(v[c]);
                }
            }
        }
        let tex = Texture::new(px, cov).unwrap();
        let filled = fill_holes(&tex, &Mask::filled(res, res, true), 4).unwrap();
        for y in 0..res {
            for x in 0..res {
                let p = filled.pixels().pixel(x, y);
                for c in 0..3 {
                    assert!(
                        p[c] >= lo[c] - 1e-5 && p[c] <= hi[c] + 1e-5,
                        "value {} outside [{}, {}]",
                        p[c],
                        lo[c],
                        hi[c]
                    );
                }
            }
        }
    }

    #[test]
    fn fill_holes_rejects_zero_coverage() {
        let tex = Texture::new(Image::new(8, 8, 3), Mask::new(8, 8)).unwrap();
        assert!(matches!(
            fill_holes(&tex, &Mask::filled(8, 8, true), 2),
            Err(Error::ZeroCoverage)
        ));
    }

    #[test]
    fn upscale_constant_stays_constant() {
        let tex = Texture::new(Image::filled(16, 16, 3, 0.37), Mask::filled(16, 16, true)).unwrap();
        let up = upscale(&tex, 2).unwrap();
        assert_eq!(up.width(), 32);
        for v in up.pixels().data() {
            assert!((v - 0.37).abs() < 1e-6);
        }
    }

    #[test]
    fn upscale_factor_bounds() {
        let tex = Texture::new(Image::new(16, 16, 3), Mask::new(16, 16)).unwrap();
        assert!(upscale(&tex, 3).is_err());
        let big = Texture::new(Image::new(2048, 2048, 3), Mask::new(2048, 2048)).unwrap();
        assert!(upscale(&big, 4).is_err());
        let l1024 = Texture::new(Image::new(1024, 1024, 3), Mask::new(1024, 1024)).unwrap();
        assert_eq!(upscale(&l1024, 4).unwrap().width(), 4096);
    }

    #[test]
    fn upscale_delta_matches_kernel_oracle() {
        // A small bump on a mid-gray background: the response around the
        // bump equals the separable Lanczos-3 weights, independently
        // evaluated here from the definition.
        let res = 32;
        let amp = 0.25f32;
        let mut px = Image::filled(res, res, 3, 0.5);
        px.set_pixel(16, 16, &[0.75, 0.75, 0.75]);
        let tex = Texture::new(px, Mask::filled(res, res, true)).unwrap();
        let up = upscale(&tex, 2).unwrap();

        let sinc = |t: f64| {
            if t == 0.0 {
                1.0
            } else {
                (std::f64::consts::PI * t).sin() / (std::f64::consts::PI * t)
            }
        };
        let kernel = |t: f64| {
            if t.abs() >= 3.0 {
                0.0
            } else {
                sinc(t) * sinc(t / 3.0)
            }
        };
        // Output pixel ox maps to source coordinate (ox+0.5)/2 - 0.5.
        let weight_1d = |o: usize, src_idx: i64| -> f64 {
            let coord = (o as f64 + 0.5) / 2.0 - 0.5;
            let start = (coord - 3.0).ceil() as i64;
            let end = (coord + 3.0).floor() as i64;
            let mut total = 0.0;
            let mut w = 0.0;
            for i in start..=end {
                let k = kernel(coord - i as f64);
                total += k;
                if i == src_idx {
                    w = k;
                }
            }
            w / total
        };
        for oy in 28..36 {
            for ox in 28..36 {
                let expect = 0.5 + amp * (weight_1d(ox, 16) * weight_1d(oy, 16)) as f32;
                let got = up.pixels().get(ox, oy, 0);
                assert!(
                    (got - expect).abs() < 1e-6,
                    "({ox},{oy}): {got} vs {expect}"
                );
            }
        }
    }
}
