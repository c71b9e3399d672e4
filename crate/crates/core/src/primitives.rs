//! Parametric primitive meshes and their analytic signed distance functions.
//!
//! These serve as the geometry source for the unconditioned procedural
//! backend and as reconstruction oracles in tests.

use std::collections::HashMap;

use crate::math::Vec3;
use crate::mesh::Mesh;

/// Axis-aligned cube with side 1.0 centered at the origin: 8 vertices,
/// 12 triangles, outward winding.
pub fn unit_cube() -> Mesh {
    let h = 0.5;
    let vertices = vec![
        Vec3::new(-h, -h, -h),
        Vec3::new(h, -h, -h),
        Vec3::new(h, h, -h),
        Vec3::new(-h, h, -h),
        Vec3::new(-h, -h, h),
        Vec3::new(h, -h, h),
        Vec3::new(h, h, h),
        Vec3::new(-h, h, h),
    ];
    let faces = vec![
        [0, 3, 2],
        [0, 2, 1], // -z
        [4, 5, 6],
        [4, 6, 7], // +z
        [0, 4, 7],
        [0, 7, 3], // -x
        [1, 2, 6],
        [1, 6, 5], // +x
        [0, 1, 5],
        [0, 5, 4], // -y
        [3, 6, 2],
        [3, 7, 6], // +y
    ];
    Mesh::new(vertices, faces)
}

/// Icosphere of the given radius: an icosahedron subdivided `subdivisions`
/// times with vertices projected onto the sphere. Vertex count is
/// 10*4^n + 2, face count 20*4^n.
pub fn icosphere(subdivisions: u32, radius: f32) -> Mesh {
    let phi = (1.0 + 5.0f32.sqrt()) * 0.5;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();

    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = ((vertices[a as usize] + vertices[b as usize]) * 0.5).normalize();
                vertices.push(m);
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut vertices);
            let bc = midpoint(f[1], f[2], &mut vertices);
            let ca = midpoint(f[2], f[0], &mut vertices);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }

    for v in &mut vertices {
        *v *= radius;
    }
    Mesh::new(vertices, faces)
}

/// Torus in the XZ plane: `ring_radius` from the origin to the tube center,
/// `tube_radius` around the tube. `segments` around the ring, `sides`
/// around the tube.
pub fn torus(ring_radius: f32, tube_radius: f32, segments: u32, sides: u32) -> Mesh {
    let mut vertices = Vec::with_capacity((segments * sides) as usize);
    for i in 0..segments {
        let theta = std::f32::consts::TAU * i as f32 / segments as f32;
        let (st, ct) = theta.sin_cos();
        for j in 0..sides {
            let phi = std::f32::consts::TAU * j as f32 / sides as f32;
            let (sp, cp) = phi.sin_cos();
            let d = ring_radius + tube_radius * cp;
            vertices.push(Vec3::new(d * ct, tube_radius * sp, d * st));
        }
    }
    let idx = |i: u32, j: u32| (i % segments) * sides + (j % sides);
    let mut faces = Vec::with_capacity((segments * sides * 2) as usize);
    for i in 0..segments {
        for j in 0..sides {
            let a = idx(i, j);
            let b = idx(i + 1, j);
            let c = idx(i + 1, j + 1);
            let d = idx(i, j + 1);
            faces.push([a, c, b]);
            faces.push([a, d, c]);
        }
    }
    Mesh::new(vertices, faces)
}

/// Capsule along the Y axis: cylinder of half-height `half_height` with
/// hemispherical caps of the given radius.
pub fn capsule(radius: f32, half_height: f32, segments: u32, rings: u32) -> Mesh {
    let mut vertices = Vec::new();
    // (y, ring radius) profile from bottom cap to top cap.
    let mut profile = Vec::new();
    for k in 1..=rings {
        let a = -std::f32::consts::FRAC_PI_2 + std::f32::consts::FRAC_PI_2 * k as f32 / rings as f32;
        profile.push((-half_height + radius * a.sin(), radius * a.cos()));
    }
    for k in 0..rings {
        let a = std::f32::consts::FRAC_PI_2 * k as f32 / rings as f32;
        profile.push((half_height + radius * a.sin(), radius * a.cos()));
    }

    let bottom_pole = 0u32;
    vertices.push(Vec3::new(0.0, -half_height - radius, 0.0));
    let ring_start = vertices.len() as u32;
    for &(y, r) in &profile {
        for s in 0..segments {
            let t = std::f32::consts::TAU * s as f32 / segments as f32;
            vertices.push(Vec3::new(r * t.cos(), y, r * t.sin()));
        }
    }
    let top_pole = vertices.len() as u32;
    vertices.push(Vec3::new(0.0, half_height + radius, 0.0));

    let ring_idx = |ring: u32, s: u32| ring_start + ring * segments + (s % segments);
    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([bottom_pole, ring_idx(0, s), ring_idx(0, s + 1)]);
    }
    let nrings = profile.len() as u32;
    for r in 0..nrings - 1 {
        for s in 0..segments {
            let a = ring_idx(r, s);
            let b = ring_idx(r, s + 1);
            let c = ring_idx(r + 1, s + 1);
            let d = ring_idx(r + 1, s);
            faces.push([a, c, b]);
            faces.push([a, d, c]);
        }
    }
    for s in 0..segments {
        faces.push([top_pole, ring_idx(nrings - 1, s + 1), ring_idx(nrings - 1, s)]);
    }
    Mesh::new(vertices, faces)
}

pub fn sphere_sdf(p: Vec3, radius: f32) -> f32 {
    p.norm() - radius
}

pub fn box_sdf(p: Vec3, half_extent: Vec3) -> f32 {
    let q = Vec3::new(
        p.x.abs() - half_extent.x,
        p.y.abs() - half_extent.y,
        p.z.abs() - half_extent.z,
    );
    let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
    let inside = q.x.max(q.y).max(q.z).min(0.0);
    outside + inside
}

pub fn torus_sdf(p: Vec3, ring_radius: f32, tube_radius: f32) -> f32 {
    let qx = (p.x * p.x + p.z * p.z).sqrt() - ring_radius;
    (qx * qx + p.y * p.y).sqrt() - tube_radius
}

pub fn capsule_sdf(p: Vec3, radius: f32, half_height: f32) -> f32 {
    let y = p.y.clamp(-half_height, half_height);
    (p - Vec3::new(0.0, y, 0.0)).norm() - radius
}

/// Signed volume of a closed mesh; positive for outward-facing winding.
pub fn signed_volume(mesh: &Mesh) -> f32 {
    mesh.faces
        .iter()
        .map(|f| {
            let a = mesh.vertices[f[0] as usize];
            let b = mesh.vertices[f[1] as usize];
            let c = mesh.vertices[f[2] as usize];
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum()
}
