//! PBR material model: the five-channel texture semantics and the analytic
//! shading used for the "shaded appearance" channel.
//!
//! The exact shading formula, reimplemented verbatim by the test oracle:
//!
//! ```text
//! nl = max(0, n.l)            nv = max(0, n.v)
//! h  = normalize(l + v)       nh = max(0, n.h)     hv = max(0, h.v)
//! alpha = roughness^2
//! D  = alpha^2 / (pi * ((nh^2) * (alpha^2 - 1) + 1)^2)          [GGX]
//! F0 = lerp(0.04, albedo, metalness)  per channel
//! F  = F0 + (1 - F0) * (1 - hv)^5                               [Schlick]
//! k  = alpha / 2
//! G  = (nl / (nl*(1-k) + k)) * (nv / (nv*(1-k) + k))            [Smith-Schlick]
//! spec    = D * F * G / max(4 * nl * nv, 1e-4)
//! diffuse = albedo * (1 - metalness) * nl
//! out = clamp01(ambient*albedo + light * clamp01(diffuse + spec * nl))
//! ```
//!
//! The inner clamp bounds the directional response by the light intensity,
//! so `out <= ambient + light` holds componentwise.

use crate::error::{Error, Result};
use crate::image2d::{Image, Mask};
use crate::math::{clamp01, Vec3};
use crate::texture::Texture;

/// Albedo + roughness + metalness maps at a common resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PBRTextureSet {
    pub albedo: Image,
    pub roughness: Image,
    pub metalness: Image,
}

impl PBRTextureSet {
    pub fn new(albedo: Image, roughness: Image, metalness: Image) -> Result<Self> {
        if albedo.channels() != 3 || roughness.channels() != 1 || metalness.channels() != 1 {
            return Err(Error::ShapeMismatch(
                "albedo must have 3 channels, roughness/metalness 1".into(),
            ));
        }
        if albedo.width() != roughness.width()
            || albedo.width() != metalness.width()
            || albedo.height() != roughness.height()
            || albedo.height() != metalness.height()
        {
            return Err(Error::ShapeMismatch(
                "PBR maps must share one resolution".into(),
            ));
        }
        Ok(Self {
            albedo,
            roughness,
            metalness,
        })
    }

    pub fn constant(resolution: usize, albedo: [f32; 3], roughness: f32, metalness: f32) -> Self {
        let mut a = Image::new(resolution, resolution, 3);
        for y in 0..resolution {
            for x in 0..resolution {
                a.set_pixel(x, y, &albedo);
            }
        }
        Self {
            albedo: a,
            roughness: Image::filled(resolution, resolution, 1, roughness),
            metalness: Image::filled(resolution, resolution, 1, metalness),
        }
    }

    pub fn resolution(&self) -> usize {
        self.albedo.width()
    }

    /// Bilinear sample at UV coordinates (u right, v down, origin top-left).
    pub fn sample(&self, u: f32, v: f32) -> ([f32; 3], f32, f32) {
        let x = u * self.albedo.width() as f32;
        let y = v * self.albedo.height() as f32;
        let mut alb = [0.0f32; 3];
        let mut rough = [0.0f32];
        let mut metal = [0.0f32];
        self.albedo.sample_bilinear(x, y, &mut alb);
        self.roughness.sample_bilinear(x, y, &mut rough);
        self.metalness.sample_bilinear(x, y, &mut metal);
        (alb, clamp01(rough[0]), clamp01(metal[0]))
    }

    /// Interleave back into a five-channel texture.
    pub fn to_texture(&self, mask: Mask) -> Result<Texture> {
        let (w, h) = (self.albedo.width(), self.albedo.height());
        let mut img = Image::new(w, h, 5);
        for y in 0..h {
            for x in 0..w {
                let a = self.albedo.pixel(x, y);
                let px = [
                    a[0],
                    a[1],
                    a[2],
                    self.roughness.get(x, y, 0),
                    self.metalness.get(x, y, 0),
                ];
                img.set_pixel(x, y, &px);
            }
        }
        Texture::new(img, mask)
    }
}

/// One directional light plus a constant ambient term.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LightConfig {
    /// Unit vector pointing from the surface toward the light.
    pub direction: [f32; 3],
    pub intensity: [f32; 3],
    pub ambient: [f32; 3],
}

impl Default for LightConfig {
    fn default() -> Self {
        Self {
            direction: normalize3([0.4, 0.8, 0.3]),
            intensity: [1.0, 1.0, 1.0],
            ambient: [0.12, 0.12, 0.12],
        }
    }
}

fn normalize3(v: [f32; 3]) -> [f32; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

impl LightConfig {
    pub fn validate(&self) -> Result<()> {
        let d = Vec3::from(self.direction);
        if (d.norm() - 1.0).abs() > 1e-3 {
            return Err(Error::InvalidArgument(
                "light direction must be unit length".into(),
            ));
        }
        if self.intensity.iter().chain(&self.ambient).any(|&x| x < 0.0) {
            return Err(Error::InvalidArgument(
                "light intensities must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Shade one surface sample. See the module docs for the exact formula.
pub fn shade(
    albedo: [f32; 3],
    roughness: f32,
    metalness: f32,
    normal: Vec3,
    view_dir: Vec3,
    light: &LightConfig,
) -> [f32; 3] {
    let roughness = clamp01(roughness);
    let metalness = clamp01(metalness);
    let l = Vec3::from(light.direction);
    let n = normal;
    let v = view_dir;

    let nl = n.dot(&l).max(0.0);
    let nv = n.dot(&v).max(0.0);

    let mut out = [0.0f32; 3];
    if nl > 0.0 {
        let h = (l + v).normalize();
        let nh = n.dot(&h).max(0.0);
        let hv = h.dot(&v).max(0.0);

        let alpha = roughness * roughness;
        let a2 = alpha * alpha;
        let denom = nh * nh * (a2 - 1.0) + 1.0;
        let d = a2 / (std::f32::consts::PI * denom * denom);

        let k = alpha * 0.5;
        let g = (nl / (nl * (1.0 - k) + k)) * (nv / (nv * (1.0 - k) + k));

        let fres_pow = (1.0 - hv).powi(5);
        let spec_den = (4.0 * nl * nv).max(1e-4);

        for c in 0..3 {
            let f0 = 0.04 + (albedo[c] - 0.04) * metalness;
            let fres = f0 + (1.0 - f0) * fres_pow;
            let spec = d * fres * g / spec_den;
            let diffuse = albedo[c] * (1.0 - metalness) * nl;
            out[c] = clamp01(diffuse + spec * nl);
        }
    }
    for c in 0..3 {
        out[c] = clamp01(light.ambient[c] * albedo[c] + light.intensity[c] * out[c]);
    }
    out
}

/// Split a five-channel texture into albedo / roughness / metalness maps,
/// clamping the scalar channels to [0,1].
pub fn split_channels(texture: &Texture) -> Result<PBRTextureSet> {
    if texture.channels() != 5 {
        return Err(Error::ShapeMismatch(format!(
            "split_channels requires 5 channels, got {}",
            texture.channels()
        )));
    }
    let (w, h) = (texture.width(), texture.height());
    let mut albedo = Image::new(w, h, 3);
    let mut roughness = Image::new(w, h, 1);
    let mut metalness = Image::new(w, h, 1);
    for y in 0..h {
        for x in 0..w {
            let p = texture.pixels().pixel(x, y);
            albedo.set_pixel(x, y, &[clamp01(p[0]), clamp01(p[1]), clamp01(p[2])]);
            roughness.set(x, y, 0, clamp01(p[3]));
            metalness.set(x, y, 0, clamp01(p[4]));
        }
    }
    PBRTextureSet::new(albedo, roughness, metalness)
}
