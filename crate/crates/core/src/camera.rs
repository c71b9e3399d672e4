//! Perspective cameras, the canonical turntable rig and point projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Pinhole camera aimed at a target point. Image space uses the top-left
/// convention: continuous pixel coordinates run from (0,0) at the top-left
/// image corner to (res,res) at the bottom-right, and pixel (i,j) has its
/// center at (i+0.5, j+0.5).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: [f32; 3],
    pub target: [f32; 3],
    pub up: [f32; 3],
    pub fov_deg: f32,
    pub resolution: u32,
    pub near: f32,
    pub far: f32,
}

/// Orthonormal view frame: right/up/forward, with forward pointing from the
/// camera toward the target.
#[derive(Debug, Clone, Copy)]
pub struct ViewBasis {
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
    pub origin: Vec3,
}

/// Projection of a single point; see [`Camera::project`].
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    /// Continuous pixel coordinates.
    pub pixel: [f32; 2],
    /// Camera-space depth: distance along the forward axis.
    pub depth: f32,
    pub in_frustum: bool,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        let pos = Vec3::from(self.position);
        let tgt = Vec3::from(self.target);
        if (pos - tgt).norm() < 1e-9 {
            return Err(Error::InvalidArgument(
                "camera position equals its target".into(),
            ));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::InvalidArgument(format!(
                "fov {} outside (0, 180)",
                self.fov_deg
            )));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(Error::InvalidArgument(format!(
                "invalid near/far {} / {}",
                self.near, self.far
            )));
        }
        if self.resolution == 0 {
            return Err(Error::InvalidArgument("zero resolution".into()));
        }
        Ok(())
    }

    pub fn basis(&self) -> ViewBasis {
        let origin = Vec3::from(self.position);
        let forward = (Vec3::from(self.target) - origin).normalize();
        let mut up_hint = Vec3::from(self.up);
        if forward.cross(&up_hint).norm() < 1e-6 {
            // Degenerate hint; fall back on an axis not parallel to forward.
            up_hint = if forward.y.abs() < 0.9 {
                Vec3::new(0.0, 1.0, 0.0)
            } else {
                Vec3::new(1.0, 0.0, 0.0)
            };
        }
        let right = forward.cross(&up_hint).normalize();
        let up = right.cross(&forward);
        ViewBasis {
            right,
            up,
            forward,
            origin,
        }
    }

    /// Focal length in pixels for the vertical field of view.
    pub fn focal_px(&self) -> f32 {
        let half = (self.fov_deg.to_radians() * 0.5).tan();
        self.resolution as f32 * 0.5 / half
    }

    /// Transform a world point into camera space: x right, y up, z = depth
    /// along the forward axis.
    pub fn to_camera_space(&self, p: Vec3) -> Vec3 {
        let b = self.basis();
        let d = p - b.origin;
        Vec3::new(d.dot(&b.right), d.dot(&b.up), d.dot(&b.forward))
    }

    /// Project a world point to continuous pixel coordinates and depth.
    /// Points behind the camera, outside the image rectangle or outside
    /// [near, far] report `in_frustum = false` (the pixel/depth values are
    /// still returned for diagnostic use when the depth is positive).
    pub fn project(&self, p: Vec3) -> Projection {
        let c = self.to_camera_space(p);
        let res = self.resolution as f32;
        if c.z <= 1e-9 {
            return Projection {
                pixel: [f32::NAN, f32::NAN],
                depth: c.z,
                in_frustum: false,
            };
        }
        let f = self.focal_px();
        let px = res * 0.5 + f * c.x / c.z;
        let py = res * 0.5 - f * c.y / c.z;
        let in_frustum = c.z >= self.near
            && c.z <= self.far
            && px >= 0.0
            && px < res
            && py >= 0.0
            && py < res;
        Projection {
            pixel: [px, py],
            depth: c.z,
            in_frustum,
        }
    }
}

/// `count` cameras on a turntable around the +Y axis: azimuths 360*i/count
/// degrees (measured from +X toward +Z), common elevation and radius, all
/// aimed at the origin, ordered by azimuth.
pub fn canonical_cameras(
    count: u32,
    elevation_deg: f32,
    radius: f32,
    resolution: u32,
    fov_deg: f32,
) -> Result<Vec<Camera>> {
    if count == 0 {
        return Err(Error::InvalidArgument("camera count must be >= 1".into()));
    }
    let elev = elevation_deg.to_radians();
    let (se, ce) = elev.sin_cos();
    let mut cams = Vec::with_capacity(count as usize);
    for i in 0..count {
        let azimuth = std::f32::consts::TAU * i as f32 / count as f32;
        let (sa, ca) = azimuth.sin_cos();
        let cam = Camera {
            position: [radius * ce * ca, radius * se, radius * ce * sa],
            target: [0.0, 0.0, 0.0],
            up: [0.0, 1.0, 0.0],
            fov_deg,
            resolution,
            near: 0.05,
            far: 100.0,
        };
        cam.validate()?;
        cams.push(cam);
    }
    Ok(cams)
}

/// Azimuth of a camera position in [0, 2pi), used to fix summation order
/// during fusion.
pub fn camera_azimuth(cam: &Camera) -> f32 {
    let a = (cam.position[2]).atan2(cam.position[0]);
    if a < 0.0 {
        a + std::f32::consts::TAU
    } else {
        a
    }
}
