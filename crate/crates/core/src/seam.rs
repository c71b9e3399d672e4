//! Cross-seam texture repair by relaxed averaging along seam edges.

use std::collections::{BTreeMap, BTreeSet};

use crate::atlas::SeamEdgeList;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::texture::Texture;

#[derive(Debug, Clone, Copy)]
pub struct SeamParams {
    /// Relaxation factor toward the two-sided average.
    pub lambda: f32,
    /// Samples per texel of seam length.
    pub samples_per_texel: f32,
}

impl Default for SeamParams {
    fn default() -> Self {
        Self {
            lambda: 0.7,
            samples_per_texel: 2.0,
        }
    }
}

/// Texel pair sampled on the two UV sides of one seam point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct SamplePair {
    a: (usize, usize),
    b: (usize, usize),
}

fn sample_pairs(seams: &SeamEdgeList, resolution: usize, samples_per_texel: f32) -> Vec<SamplePair> {
    let scale = resolution as f32;
    let clamp = |v: f32| -> usize { (v.floor().max(0.0) as usize).min(resolution - 1) };
    let mut pairs = Vec::new();
    for seam in seams {
        let len_a = (seam.sides[0].uv_b - seam.sides[0].uv_a).norm() * scale;
        let len_b = (seam.sides[1].uv_b - seam.sides[1].uv_a).norm() * scale;
        let len = len_a.max(len_b);
        let count = ((len * samples_per_texel).ceil() as usize).max(2);
        for k in 0..count {
            let t = (k as f32 + 0.5) / count as f32;
            // Nudge half a texel into each chart so the footprint lands on
            // chart texels rather than the gutter.
            let ua = seam.sides[0].uv_a
                + (seam.sides[0].uv_b - seam.sides[0].uv_a) * t
                + seam.sides[0].inward * (0.51 / scale);
            let ub = seam.sides[1].uv_a
                + (seam.sides[1].uv_b - seam.sides[1].uv_a) * t
                + seam.sides[1].inward * (0.51 / scale);
            pairs.push(SamplePair {
                a: (clamp(ua.x * scale), clamp(ua.y * scale)),
                b: (clamp(ub.x * scale), clamp(ub.y * scale)),
            });
        }
    }
    pairs
}

/// Mean absolute cross-seam difference over seam samples, averaged over
/// channels. The before/after ratio of this metric is the contraction
/// measure used by the pipeline.
pub fn seam_discontinuity(texture: &Texture, seams: &SeamEdgeList) -> f32 {
    let pairs = sample_pairs(seams, texture.width(), SeamParams::default().samples_per_texel);
    if pairs.is_empty() {
        return 0.0;
    }
    let channels = texture.channels();
    let mut total = 0.0f64;
    for p in &pairs {
        let pa = texture.pixels().pixel(p.a.0, p.a.1);
        let pb = texture.pixels().pixel(p.b.0, p.b.1);
        let mut d = 0.0f32;
        for c in 0..channels {
            d += (pa[c] - pb[c]).abs();
        }
        total += (d / channels as f32) as f64;
    }
    (total / pairs.len() as f64) as f32
}

/// Iteratively pull both UV sides of every seam sample toward their average
/// (relaxation `lambda`), then diffuse the correction one texel ring into
/// each chart per iteration with distance-weighted blending. Edges are
/// processed in list order (the enumeration is sorted), so the repair is
/// deterministic.
pub fn fix_seams(
    mesh: &Mesh,
    seams: &SeamEdgeList,
    texture: &Texture,
    iterations: usize,
    params: &SeamParams,
) -> Result<Texture> {
    let nverts = mesh.vertices.len() as u32;
    for s in seams {
        if s.vertices.0 >= nverts || s.vertices.1 >= nverts {
            return Err(Error::InvalidArgument(format!(
                "seam edge ({}, {}) out of range for mesh with {} vertices",
                s.vertices.0, s.vertices.1, nverts
            )));
        }
    }
    let mut out = texture.clone();
    if seams.is_empty() || iterations == 0 {
        return Ok(out);
    }
    let res = texture.width();
    let channels = texture.channels();
    let pairs = sample_pairs(seams, res, params.samples_per_texel);

    // The seam texel set and its one-texel ring, fixed across iterations.
    let mut seam_texels: BTreeSet<(usize, usize)> = BTreeSet::new();
    for p in &pairs {
        seam_texels.insert(p.a);
        seam_texels.insert(p.b);
    }
    // ring texel -> (seam neighbors, weights)
    let mut ring: BTreeMap<(usize, usize), Vec<((usize, usize), f32)>> = BTreeMap::new();
    for &(x, y) in &seam_texels {
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
                let q = (nx as usize, ny as usize);
                if seam_texels.contains(&q) || !texture.coverage().get(q.0, q.1) {
                    continue;
                }
                let w = if dx != 0 && dy != 0 {
                    std::f32::consts::FRAC_1_SQRT_2
                } else {
                    1.0
                };
                ring.entry(q).or_default().push(((x, y), w));
            }
        }
    }

    let lambda = params.lambda;
    let mut avg = vec![0.0f32; channels];
    for _ in 0..iterations {
        // Seam averaging, sequential in sorted edge/sample order.
        for p in &pairs {
            {
                let pa = out.pixels().pixel(p.a.0, p.a.1);
                let pb = out.pixels().pixel(p.b.0, p.b.1);
                for c in 0..channels {
                    avg[c] = (pa[c] + pb[c]) * 0.5;
                }
            }
            for &(x, y) in &[p.a, p.b] {
                let px = out.pixels_mut().pixel_mut(x, y);
                for c in 0..channels {
                    px[c] += lambda * (avg[c] - px[c]);
                }
            }
        }
        // One-ring diffusion from a snapshot.
        let snapshot = out.pixels().clone();
        for (q, neighbors) in &ring {
            let mut acc = vec![0.0f32; channels];
            let mut wsum = 0.0f32;
            for &((sx, sy), w) in neighbors {
                let p = snapshot.pixel(sx, sy);
                for c in 0..channels {
                    acc[c] += w * p[c];
                }
                wsum += w;
            }
            let px = out.pixels_mut().pixel_mut(q.0, q.1);
            for c in 0..channels {
                px[c] += lambda * (acc[c] / wsum - px[c]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{find_seam_edges, generate_atlas};
    use crate::image2d::{Image, Mask};
    use crate::primitives;

    fn cube_setup() -> (Mesh, SeamEdgeList) {
        let (mesh, charts) = generate_atlas(primitives::unit_cube(), 45.0, 4).unwrap();
        let seams = find_seam_edges(&mesh, &charts).unwrap();
        (mesh, seams)
    }

    fn chart_tone_texture(mesh: &Mesh, tone: &dyn Fn(&crate::atlas::Chart) -> f32, res: usize) -> Texture {
        let (_, charts) = generate_atlas(primitives::unit_cube(), 45.0, 4).unwrap();
        let (ids, _) = crate::atlas::rasterize_chart_ids(mesh, &charts, res);
        let mut img = Image::new(res, res, 3);
        let mut cov = Mask::new(res, res);
        for y in 0..res {
            for x in 0..res {
                let id = ids[y * res + x];
                if id >= 0 {
                    let v = tone(&charts[id as usize]);
                    img.set_pixel(x, y, &[v, v, v]);
                    cov.set(x, y, true);
                }
            }
        }
        Texture::new(img, cov).unwrap()
    }

    /// Black on the +axis faces, white on the -axis faces: half of the 12
    /// cube seams start fully discontinuous.
    fn two_tone(chart: &crate::atlas::Chart) -> f32 {
        if chart.normal.x + chart.normal.y + chart.normal.z > 0.0 {
            0.0
        } else {
            1.0
        }
    }

    #[test]
    fn continuous_texture_is_a_fixed_point() {
        let (mesh, seams) = cube_setup();
        let res = 128;
        let tex = {
            let img = Image::filled(res, res, 3, 0.42);
            Texture::new(img, Mask::filled(res, res, true)).unwrap()
        };
        let fixed = fix_seams(&mesh, &seams, &tex, 4, &SeamParams::default()).unwrap();
        for (a, b) in fixed.pixels().data().iter().zip(tex.pixels().data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn two_tone_cube_contracts() {
        let (mesh, seams) = cube_setup();
        assert_eq!(seams.len(), 12);
        let res = 128;
        let tex = chart_tone_texture(&mesh, &two_tone, res);
        let before = seam_discontinuity(&tex, &seams);
        assert!(before > 0.45, "two-tone cube should start discontinuous");
        let mut metrics = vec![before];
        let mut current = tex;
        for _ in 0..8 {
            current = fix_seams(&mesh, &seams, &current, 1, &SeamParams::default()).unwrap();
            metrics.push(seam_discontinuity(&current, &seams));
        }
        for w in metrics.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "metric increased: {metrics:?}");
        }
        assert!(
            metrics[8] <= 0.5 * before,
            "contraction below 50%: {metrics:?}"
        );
        for v in current.pixels().data() {
            assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn second_round_contracts_less_than_first() {
        let (mesh, seams) = cube_setup();
        let tex = chart_tone_texture(&mesh, &|c| (c.normal.x + 1.0) * 0.3 + (c.normal.y + 1.0) * 0.15, 128);
        let m0 = seam_discontinuity(&tex, &seams);
        let once = fix_seams(&mesh, &seams, &tex, 8, &SeamParams::default()).unwrap();
        let m1 = seam_discontinuity(&once, &seams);
        let twice = fix_seams(&mesh, &seams, &once, 8, &SeamParams::default()).unwrap();
        let m2 = seam_discontinuity(&twice, &seams);
        let first_drop = m0 - m1;
        let second_drop = m1 - m2;
        assert!(second_drop <= first_drop + 1e-6);
        assert!(second_drop >= -1e-6);
    }

    #[test]
    fn out_of_range_seam_indices_rejected() {
        let (mesh, mut seams) = cube_setup();
        seams[0].vertices.0 = mesh.vertex_count() as u32 + 7;
        let tex = Texture::new(Image::new(64, 64, 3), Mask::filled(64, 64, true)).unwrap();
        assert!(fix_seams(&mesh, &seams, &tex, 1, &SeamParams::default()).is_err());
    }
}
