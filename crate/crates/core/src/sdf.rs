//! Truncated signed distance grid and multi-view depth fusion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{camera_azimuth, Camera};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::raster::RenderedView;

/// Weight of an empty-space (mask = 0) carving sample relative to a surface
/// observation of weight 1.
pub const CARVE_WEIGHT: f32 = 0.25;
const TAU_CELLS: f32 = 3.0;
const PAD_CELLS: usize = 2;

/// Regular grid of truncated signed distances sampled at voxel corners.
/// The grid covers the unit cube padded by two cells; values are clamped
/// to +-tau where tau = 3 cells. Corners with weight 0 were never observed
/// and hold +tau.
#[derive(Debug, Clone)]
pub struct SDFGrid {
    resolution: usize,
    origin: Vec3,
    cell_size: f32,
    tau: f32,
    values: Vec<f32>,
    weights: Vec<f32>,
}

/// JSON sidecar accompanying raw grid dumps.
#[derive(Debug, Serialize, Deserialize)]
pub struct GridHeader {
    pub resolution: usize,
    pub origin: [f32; 3],
    pub cell_size: f32,
    pub tau: f32,
}

impl SDFGrid {
    /// Empty grid: all corners unobserved (+tau, weight 0).
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < 8 {
            return Err(Error::InvalidArgument(format!(
                "grid resolution {resolution} too small (minimum 8)"
            )));
        }
        // resolution corners per axis span the unit cube plus 2 cells of
        // padding on each side: cell * (resolution - 1) = 1 + 4 * cell.
        let cell_size = 1.0 / (resolution - 1 - 2 * PAD_CELLS) as f32;
        let tau = TAU_CELLS * cell_size;
        let origin = Vec3::repeat(-0.5 - PAD_CELLS as f32 * cell_size);
        let n = resolution * resolution * resolution;
        Ok(Self {
            resolution,
            origin,
            cell_size,
            tau,
            values: vec![tau; n],
            weights: vec![0.0; n],
        })
    }

    /// Fill from an analytic SDF; every corner counts as fully observed.
    pub fn from_fn(resolution: usize, sdf: impl Fn(Vec3) -> f32) -> Result<Self> {
        let mut grid = Self::new(resolution)?;
        let tau = grid.tau;
        for z in 0..resolution {
            for y in 0..resolution {
                for x in 0..resolution {
                    let p = grid.corner_position(x, y, z);
                    let i = grid.index(x, y, z);
                    grid.values[i] = sdf(p).clamp(-tau, tau);
                    grid.weights[i] = 1.0;
                }
            }
        }
        Ok(grid)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn cell_size(&self) -> f32 {
        self.cell_size
    }

    pub fn tau(&self) -> f32 {
        self.tau
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.resolution + y) * self.resolution + x
    }

    pub fn corner_position(&self, x: usize, y: usize, z: usize) -> Vec3 {
        self.origin
            + Vec3::new(
                x as f32 * self.cell_size,
                y as f32 * self.cell_size,
                z as f32 * self.cell_size,
            )
    }

    #[inline]
    pub fn value(&self, x: usize, y: usize, z: usize) -> f32 {
        self.values[self.index(x, y, z)]
    }

    #[inline]
    pub fn weight(&self, x: usize, y: usize, z: usize) -> f32 {
        self.weights[self.index(x, y, z)]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn weights_mut(&mut self) -> &mut [f32] {
        &mut self.weights
    }

    /// Trilinear interpolation of corner values at an interior point.
    pub fn sample(&self, p: Vec3) -> Result<f32> {
        let local = (p - self.origin) / self.cell_size;
        let max = (self.resolution - 1) as f32;
        if local.x < 0.0
            || local.y < 0.0
            || local.z < 0.0
            || local.x > max
            || local.y > max
            || local.z > max
        {
            return Err(Error::OutOfBounds {
                point: [p.x, p.y, p.z],
            });
        }
        let xi = (local.x.floor() as usize).min(self.resolution - 2);
        let yi = (local.y.floor() as usize).min(self.resolution - 2);
        let zi = (local.z.floor() as usize).min(self.resolution - 2);
        let tx = local.x - xi as f32;
        let ty = local.y - yi as f32;
        let tz = local.z - zi as f32;
        let c = |dx: usize, dy: usize, dz: usize| self.value(xi + dx, yi + dy, zi + dz);
        let lerp = |a: f32, b: f32, t: f32| a + (b - a) * t;
        let x00 = lerp(c(0, 0, 0), c(1, 0, 0), tx);
        let x10 = lerp(c(0, 1, 0), c(1, 1, 0), tx);
        let x01 = lerp(c(0, 0, 1), c(1, 0, 1), tx);
        let x11 = lerp(c(0, 1, 1), c(1, 1, 1), tx);
        let y0 = lerp(x00, x10, ty);
        let y1 = lerp(x01, x11, ty);
        Ok(lerp(y0, y1, tz))
    }

    /// Raw dump: little-endian f32 values plus a JSON header.
    pub fn dump_raw(&self) -> (Vec<u8>, GridHeader) {
        let mut bytes = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        (
            bytes,
            GridHeader {
                resolution: self.resolution,
                origin: [self.origin.x, self.origin.y, self.origin.z],
                cell_size: self.cell_size,
                tau: self.tau,
            },
        )
    }
}

/// Fuse per-view depth/mask buffers into a truncated SDF.
///
/// Per corner and view, the corner is projected into the camera. In-frustum
/// corners landing on a masked pixel sample s = depth_buffer - corner_depth:
/// samples with s < -tau are occluded beyond the truncation band and are
/// skipped; the rest clamp to [-tau, tau] and accumulate with weight 1.
/// Corners landing on empty (mask = 0) pixels accumulate +tau at carve
/// weight 0.25. The fused value is the weighted average, summed in sorted
/// camera-azimuth order so any view permutation is bit-identical.
pub fn fuse_views_to_sdf(
    views: &[RenderedView],
    cameras: &[Camera],
    resolution: usize,
) -> Result<SDFGrid> {
    if views.len() != cameras.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} views vs {} cameras",
            views.len(),
            cameras.len()
        )));
    }
    if views.len() < 2 {
        return Err(Error::InvalidArgument(
            "fusion requires at least 2 views".into(),
        ));
    }
    let mut grid = SDFGrid::new(resolution)?;
    let tau = grid.tau;

    // Azimuth-sorted processing order (elevation and radius as tie-breaks).
    let mut order: Vec<usize> = (0..cameras.len()).collect();
    order.sort_by(|&a, &b| {
        let ka = sort_key(&cameras[a]);
        let kb = sort_key(&cameras[b]);
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });

    let res = grid.resolution;
    let origin = grid.origin;
    let cell = grid.cell_size;

    let slabs: Vec<(Vec<f32>, Vec<f32>)> = (0..res)
        .into_par_iter()
        .map(|z| {
            let mut vals = vec![tau; res * res];
            let mut wts = vec![0.0f32; res * res];
            let mut depth_sample = [0.0f32];
            for y in 0..res {
                for x in 0..res {
                    let p = origin
                        + Vec3::new(x as f32 * cell, y as f32 * cell, z as f32 * cell);
                    let mut acc = 0.0f32;
                    let mut wsum = 0.0f32;
                    for &vi in &order {
                        let cam = &cameras[vi];
                        let view = &views[vi];
                        let proj = cam.project(p);
                        if !proj.in_frustum {
                            continue;
                        }
                        let vres = view.resolution();
                        let xi = (proj.pixel[0].floor() as usize).min(vres - 1);
                        let yi = (proj.pixel[1].floor() as usize).min(vres - 1);
                        if !view.mask.get(xi, yi) {
                            // Empty-space carving.
                            acc += CARVE_WEIGHT * tau;
                            wsum += CARVE_WEIGHT;
                            continue;
                        }
                        view.depth.sample_bilinear(proj.pixel[0], proj.pixel[1], &mut depth_sample);
                        let s = depth_sample[0] - proj.depth;
                        if !s.is_finite() || s < -tau {
                            continue; // occluded beyond the truncation band
                        }
                        acc += s.min(tau);
                        wsum += 1.0;
                    }
                    let i = y * res + x;
                    if wsum > 0.0 {
                        vals[i] = acc / wsum;
                        wts[i] = wsum;
                    }
                }
            }
            (vals, wts)
        })
        .collect();

    for (z, (vals, wts)) in slabs.into_iter().enumerate() {
        let base = grid.index(0, 0, z);
        grid.values[base..base + res * res].copy_from_slice(&vals);
        grid.weights[base..base + res * res].copy_from_slice(&wts);
    }
    Ok(grid)
}

fn sort_key(cam: &Camera) -> (f32, f32, f32) {
    let azimuth = camera_azimuth(cam);
    let r = Vec3::from(cam.position).norm();
    let elevation = (cam.position[1] / r.max(1e-12)).asin();
    (azimuth, elevation, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::canonical_cameras;
    use crate::material::LightConfig;
    use crate::primitives;
    use crate::raster::rasterize;

    fn render_views(
        mesh: &crate::mesh::Mesh,
        k: u32,
    ) -> (Vec<RenderedView>, Vec<Camera>) {
        let cams = canonical_cameras(k, 20.0, 2.2, 512, 40.0).unwrap();
        let views = cams
            .iter()
            .map(|c| rasterize(mesh, c, None, &LightConfig::default()).unwrap())
            .collect();
        (views, cams)
    }

    #[test]
    fn fused_sphere_matches_analytic_near_surface() {
        // Projective TSDF measures distance along view rays, so samples
        // whose rays run nearly tangent to the surface saturate toward
        // +-tau; near-silhouette corners therefore carry errors up to the
        // truncation band no matter how many views agree. The bound below
        // holds everywhere observed; the 1.5-cell bound holds away from
        // that saturated band (>90% of near-surface corners).
        let sphere = primitives::icosphere(4, 0.4);
        let (views, cams) = render_views(&sphere, 4);
        let grid = fuse_views_to_sdf(&views, &cams, 64).unwrap();
        let tau = grid.tau();
        let tol = 1.5 * grid.cell_size();
        let mut checked = 0usize;
        let mut within = 0usize;
        for z in 0..64 {
            for y in 0..64 {
                for x in 0..64 {
                    let p = grid.corner_position(x, y, z);
                    let analytic = primitives::sphere_sdf(p, 0.4);
                    if analytic.abs() >= tau / 2.0 {
                        continue;
                    }
                    // Distance information needs at least one surface
                    // observation; carve-only and fully occluded corners
                    // hold +tau by construction.
                    if grid.weight(x, y, z) < 1.0 {
                        continue;
                    }
                    let err = (grid.value(x, y, z) - analytic).abs();
                    assert!(
                        err <= 2.0 * tol,
                        "corner ({x},{y},{z}): fused {} vs analytic {}",
                        grid.value(x, y, z),
                        analytic
                    );
                    if err < tol {
                        within += 1;
                    }
                    checked += 1;
                }
            }
        }
        assert!(checked > 5000, "only {checked} near-surface corners");
        let frac = within as f32 / checked as f32;
        assert!(frac >= 0.9, "only {frac} of corners within 1.5 cells");
    }

    #[test]
    fn all_empty_masks_carve_uniform_tau() {
        let empty = crate::mesh::Mesh::new(vec![], vec![]);
        let (views, cams) = render_views(&empty, 2);
        let grid = fuse_views_to_sdf(&views, &cams, 32).unwrap();
        let tau = grid.tau();
        for z in 0..32 {
            for y in 0..32 {
                for x in 0..32 {
                    assert_eq!(grid.value(x, y, z), tau);
                }
            }
        }
    }

    #[test]
    fn more_views_do_not_hurt_near_surface_accuracy() {
        let cube = primitives::unit_cube();
        let (views2, cams2) = render_views(&cube, 2);
        let (views8, cams8) = render_views(&cube, 8);
        let g2 = fuse_views_to_sdf(&views2, &cams2, 48).unwrap();
        let g8 = fuse_views_to_sdf(&views8, &cams8, 48).unwrap();
        let tau = g2.tau();
        let half = nalgebra::Vector3::repeat(0.5f32);
        // Oracle comparison over all near-surface corners, unobserved ones
        // holding +tau. Aggregate statistics, not per-corner dominance:
        // extra oblique views add carve bias and edge contamination on the
        // few corners the sparse rig happens to see head-on, while winning
        // everywhere the sparse rig is blind.
        let tol = 1.5 * g2.cell_size();
        let (mut sum2, mut sum8) = (0.0f64, 0.0f64);
        let (mut in2, mut in8) = (0usize, 0usize);
        let mut total = 0usize;
        for z in 0..48 {
            for y in 0..48 {
                for x in 0..48 {
                    let p = g2.corner_position(x, y, z);
                    let analytic = primitives::box_sdf(p, half);
                    if analytic.abs() >= tau / 2.0 {
                        continue;
                    }
                    let e2 = (g2.value(x, y, z) - analytic).abs();
                    let e8 = (g8.value(x, y, z) - analytic).abs();
                    total += 1;
                    sum2 += e2 as f64;
                    sum8 += e8 as f64;
                    if e2 < tol {
                        in2 += 1;
                    }
                    if e8 < tol {
                        in8 += 1;
                    }
                }
            }
        }
        assert!(total > 1000, "too few comparable corners: {total}");
        assert!(
            sum8 < sum2 * 0.8,
            "8-view mean error {sum8} not clearly below 2-view {sum2}"
        );
        assert!(
            in8 > in2,
            "8-view within-tolerance count {in8} <= 2-view {in2}"
        );
    }

    #[test]
    fn fusion_is_permutation_invariant() {
        let sphere = primitives::icosphere(3, 0.4);
        let (views, cams) = render_views(&sphere, 4);
        let a = fuse_views_to_sdf(&views, &cams, 32).unwrap();
        let mut rv: Vec<RenderedView> = views.clone();
        let mut rc = cams.clone();
        rv.rotate_left(2);
        rc.rotate_left(2);
        rv.swap(0, 1);
        rc.swap(0, 1);
        let b = fuse_views_to_sdf(&rv, &rc, 32).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn fusion_validates_inputs() {
        let sphere = primitives::icosphere(2, 0.4);
        let (views, cams) = render_views(&sphere, 2);
        assert!(fuse_views_to_sdf(&views[..1], &cams, 32).is_err());
        assert!(fuse_views_to_sdf(&views[..1], &cams[..1], 32).is_err());
    }

    #[test]
    fn sample_matches_corner_and_edge_midpoint() {
        let grid = SDFGrid::from_fn(16, |p| p.x + 2.0 * p.y - 0.5 * p.z).unwrap();
        let c = grid.corner_position(3, 5, 7);
        assert!((grid.sample(c).unwrap() - grid.value(3, 5, 7)).abs() < 1e-7);
        let a = grid.value(3, 5, 7);
        let b = grid.value(4, 5, 7);
        let mid = c + Vec3::new(grid.cell_size() * 0.5, 0.0, 0.0);
        assert!((grid.sample(mid).unwrap() - (a + b) * 0.5).abs() < 1e-6);
    }

    #[test]
    fn sample_matches_independent_trilinear_formula() {
        let grid = SDFGrid::from_fn(16, |p| (p.x * 3.1).sin() * 0.02 + p.y * 0.01 - p.z * 0.03)
            .unwrap();
        for i in 0..300u64 {
            let h = crate::math::splitmix64(i);
            let res = grid.resolution() as f32 - 1.0;
            let lx = crate::math::unit_f32(h) * res;
            let ly = crate::math::unit_f32(crate::math::splitmix64(h ^ 1)) * res;
            let lz = crate::math::unit_f32(crate::math::splitmix64(h ^ 2)) * res;
            let p = grid.origin()
                + Vec3::new(lx, ly, lz) * grid.cell_size();
            // Independent formula: sum over corners of products of weights.
            let xi = (lx.floor() as usize).min(grid.resolution() - 2);
            let yi = (ly.floor() as usize).min(grid.resolution() - 2);
            let zi = (lz.floor() as usize).min(grid.resolution() - 2);
            let (tx, ty, tz) = (lx - xi as f32, ly - yi as f32, lz - zi as f32);
            let mut expect = 0.0f32;
            for dz in 0..2 {
                for dy in 0..2 {
                    for dx in 0..2 {
                        let w = (if dx == 1 { tx } else { 1.0 - tx })
                            * (if dy == 1 { ty } else { 1.0 - ty })
                            * (if dz == 1 { tz } else { 1.0 - tz });
                        expect += w * grid.value(xi + dx, yi + dy, zi + dz);
                    }
                }
            }
            let got = grid.sample(p).unwrap();
            assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
        }
    }

    #[test]
    fn sample_out_of_bounds_errors() {
        let grid = SDFGrid::new(16).unwrap();
        assert!(grid.sample(Vec3::new(2.0, 0.0, 0.0)).is_err());
    }
}
