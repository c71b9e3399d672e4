//! Marching cubes iso-surface extraction over an [`SDFGrid`].

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::mc_tables::{CORNER_OFFSETS, EDGE_CORNERS, EDGE_TABLE, TRIANGLE_TABLE};
use crate::mesh::Mesh;
use crate::sdf::SDFGrid;

/// Extract the iso-surface using the standard 256-case table with linear
/// edge interpolation. Cells touching a corner with weight below
/// `min_weight` are skipped entirely: never-observed space produces open
/// boundaries instead of hallucinated walls. Vertices on shared cell edges
/// are welded; output coordinates stay in grid (world) space.
pub fn marching_cubes(grid: &SDFGrid, iso: f32, min_weight: f32) -> Result<Mesh> {
    if !(iso > -grid.tau() && iso < grid.tau()) {
        return Err(Error::InvalidArgument(format!(
            "iso level {iso} outside (-tau, tau) = (+-{})",
            grid.tau()
        )));
    }
    let res = grid.resolution();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    // Weld map keyed by the global ids of the edge's two corners.
    let mut edge_vertices: HashMap<(usize, usize), u32> = HashMap::new();

    let mut corner_vals = [0.0f32; 8];
    let mut corner_ids = [0usize; 8];
    let mut edge_ids: [u32; 12] = [0; 12];

    for z in 0..res - 1 {
        for y in 0..res - 1 {
            for x in 0..res - 1 {
                let mut case = 0usize;
                let mut skip = false;
                for (i, off) in CORNER_OFFSETS.iter().enumerate() {
                    let (cx, cy, cz) = (x + off[0], y + off[1], z + off[2]);
                    if grid.weight(cx, cy, cz) < min_weight {
                        skip = true;
                        break;
                    }
                    let v = grid.value(cx, cy, cz);
                    corner_vals[i] = v;
                    corner_ids[i] = grid.index(cx, cy, cz);
                    if v < iso {
                        case |= 1 << i;
                    }
                }
                if skip {
                    continue;
                }
                let edge_mask = EDGE_TABLE[case];
                if edge_mask == 0 {
                    continue;
                }
                for (e, corners) in EDGE_CORNERS.iter().enumerate() {
                    if edge_mask & (1 << e) == 0 {
                        continue;
                    }
                    let (c0, c1) = (corners[0], corners[1]);
                    let (g0, g1) = (corner_ids[c0], corner_ids[c1]);
                    let key = (g0.min(g1), g0.max(g1));
                    let id = *edge_vertices.entry(key).or_insert_with(|| {
                        // Interpolate in a fixed corner order so the welded
                        // vertex is identical from every incident cell.
                        let (a, b, va, vb) = if g0 < g1 {
                            (c0, c1, corner_vals[c0], corner_vals[c1])
                        } else {
                            (c1, c0, corner_vals[c1], corner_vals[c0])
                        };
                        let t = (iso - va) / (vb - va);
                        let pa = corner_pos(grid, x, y, z, a);
                        let pb = corner_pos(grid, x, y, z, b);
                        let p = pa + (pb - pa) * t;
                        vertices.push(p);
                        (vertices.len() - 1) as u32
                    });
                    edge_ids[e] = id;
                }
                let tri = &TRIANGLE_TABLE[case];
                let mut i = 0;
                while tri[i] >= 0 {
                    let a = edge_ids[tri[i] as usize];
                    let b = edge_ids[tri[i + 1] as usize];
                    let c = edge_ids[tri[i + 2] as usize];
                    if a != b && b != c && a != c {
                        // Table order faces the negative (inside) region;
                        // flip for outward normals on an SDF.
                        faces.push([a, c, b]);
                    }
                    i += 3;
                }
            }
        }
    }

    if faces.is_empty() {
        return Err(Error::EmptySurface);
    }
    let mut mesh = Mesh::new(vertices, faces);
    mesh.compute_vertex_normals();
    Ok(mesh)
}

fn corner_pos(grid: &SDFGrid, x: usize, y: usize, z: usize, corner: usize) -> Vec3 {
    let off = CORNER_OFFSETS[corner];
    grid.corner_position(x + off[0], y + off[1], z + off[2])
}

/// V - E + F with E counted over unique undirected edges.
pub fn euler_characteristic(mesh: &Mesh) -> i64 {
    use std::collections::HashSet;
    let mut edges: HashSet<(u32, u32)> = HashSet::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let a = f[k];
            let b = f[(k + 1) % 3];
            edges.insert((a.min(b), a.max(b)));
        }
    }
    mesh.vertex_count() as i64 - edges.len() as i64 + mesh.face_count() as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives;
    use crate::sdf::SDFGrid;

    #[test]
    fn sphere_vertices_sit_on_the_sphere() {
        let grid = SDFGrid::from_fn(64, |p| primitives::sphere_sdf(p, 0.4)).unwrap();
        let mesh = marching_cubes(&grid, 0.0, 0.5).unwrap();
        assert!(mesh.face_count() > 1000);
        let tol = 1.5 * grid.cell_size();
        for v in &mesh.vertices {
            let err = (v.norm() - 0.4).abs();
            assert!(err < tol, "vertex error {err} exceeds {tol}");
        }
        // Closed genus-0 surface; outward winding.
        assert_eq!(euler_characteristic(&mesh), 2);
        assert!(primitives::signed_volume(&mesh) > 0.0);
    }

    #[test]
    fn vertices_lie_on_sign_change_edges() {
        let grid = SDFGrid::from_fn(32, |p| primitives::sphere_sdf(p, 0.35)).unwrap();
        let mesh = marching_cubes(&grid, 0.0, 0.5).unwrap();
        let cell = grid.cell_size();
        let origin = grid.origin();
        for v in mesh.vertices.iter().step_by(3) {
            // A grid-edge point has at least two of its local coordinates
            // within rounding of integers.
            let local = (v - origin) / cell;
            let mut integral = 0;
            for c in 0..3 {
                let frac = (local[c] - local[c].round()).abs();
                if frac < 1e-4 {
                    integral += 1;
                }
            }
            assert!(integral >= 2, "vertex {v:?} not on a grid edge");
        }
    }

    #[test]
    fn uniform_grid_has_no_surface() {
        let grid = SDFGrid::from_fn(16, |_| 1.0).unwrap();
        assert!(matches!(
            marching_cubes(&grid, 0.0, 0.5),
            Err(Error::EmptySurface)
        ));
    }

    #[test]
    fn iso_outside_truncation_rejected() {
        let grid = SDFGrid::from_fn(16, |p| p.x).unwrap();
        assert!(marching_cubes(&grid, grid.tau() * 2.0, 0.5).is_err());
    }

    #[test]
    fn negated_grid_gives_identical_vertices() {
        let grid = SDFGrid::from_fn(32, |p| primitives::torus_sdf(p, 0.3, 0.15)).unwrap();
        let neg = SDFGrid::from_fn(32, |p| -primitives::torus_sdf(p, 0.3, 0.15)).unwrap();
        let a = marching_cubes(&grid, 0.0, 0.5).unwrap();
        let b = marching_cubes(&neg, 0.0, 0.5).unwrap();
        assert_eq!(a.vertex_count(), b.vertex_count());
        // Same vertex set within 1e-6 (welding order may differ).
        let mut set: std::collections::HashSet<[u32; 3]> = std::collections::HashSet::new();
        for v in &a.vertices {
            set.insert([v.x.to_bits(), v.y.to_bits(), v.z.to_bits()]);
        }
        for v in &b.vertices {
            assert!(
                set.contains(&[v.x.to_bits(), v.y.to_bits(), v.z.to_bits()]),
                "vertex {v:?} missing from the negated extraction"
            );
        }
        // Winding flips: volumes have opposite signs.
        assert!(primitives::signed_volume(&a) > 0.0);
        assert!(primitives::signed_volume(&b) < 0.0);
    }

    #[test]
    fn torus_preserves_genus() {
        let grid = SDFGrid::from_fn(64, |p| primitives::torus_sdf(p, 0.3, 0.15)).unwrap();
        let mesh = marching_cubes(&grid, 0.0, 0.5).unwrap();
        let tol = 1.5 * grid.cell_size();
        for v in &mesh.vertices {
            let err = primitives::torus_sdf(*v, 0.3, 0.15).abs();
            assert!(err < tol, "vertex error {err}");
        }
        assert_eq!(euler_characteristic(&mesh), 0);
    }

    #[test]
    fn low_weight_cells_are_skipped() {
        // Mark a slab unobserved: the surface there must disappear, leaving
        // an open boundary rather than a wall.
        let full = SDFGrid::from_fn(32, |p| primitives::sphere_sdf(p, 0.4)).unwrap();
        let full_mesh = marching_cubes(&full, 0.0, 0.5).unwrap();

        let mut partial = full.clone();
        let res = partial.resolution();
        for z in 0..res {
            for y in 0..res {
                for x in 0..res / 2 {
                    let i = partial.index(x, y, z);
                    partial_weights(&mut partial)[i] = 0.0;
                }
            }
        }
        let half_mesh = marching_cubes(&partial, 0.0, 0.5).unwrap();
        assert!(half_mesh.face_count() < full_mesh.face_count());
        // No vertex in the unobserved half beyond one cell of the cut.
        let cut_x = partial.corner_position(res / 2, 0, 0).x;
        for v in &half_mesh.vertices {
            assert!(v.x >= cut_x - partial.cell_size() - 1e-6);
        }
    }

    // Test-only access to mutate weights.
    fn partial_weights(grid: &mut SDFGrid) -> &mut [f32] {
        grid.weights_mut()
    }
}
