//! Automatic UV atlas extraction: normal-based chart growing, orthographic
//! per-chart parameterization, shelf packing, and seam-edge enumeration.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::image2d::Mask;
use crate::math::{orthonormal_basis, Vec2, Vec3};
use crate::mesh::Mesh;
use crate::uvrast::for_each_covered_texel;

/// Gutter widths are expressed in texels at this reference resolution.
pub const REFERENCE_RESOLUTION: usize = 1024;

/// An edge-connected set of faces parameterized by orthographic projection
/// onto the frame of its seed normal.
#[derive(Debug, Clone)]
pub struct Chart {
    /// Face indices into the atlased mesh (same order as the input mesh).
    pub faces: Vec<usize>,
    /// Dominant normal: the seed face's normal.
    pub normal: Vec3,
    /// Orthonormal projection axes perpendicular to `normal`.
    pub frame: (Vec3, Vec3),
    /// Placed content rectangle in UV space: (min, max), gutter excluded.
    pub uv_rect: (Vec2, Vec2),
}

/// One mesh edge whose two incident faces map to discontiguous UV locations.
#[derive(Debug, Clone)]
pub struct SeamEdge {
    /// Vertex indices of the 3D edge (from the first incident face).
    pub vertices: (u32, u32),
    /// Per-side chart id and the UV segment of the edge on that side,
    /// oriented identically on both sides.
    pub sides: [SeamSide; 2],
}

#[derive(Debug, Clone)]
pub struct SeamSide {
    pub chart: usize,
    pub uv_a: Vec2,
    pub uv_b: Vec2,
    /// Unit UV direction from the edge into this side's chart interior;
    /// texel lookups nudge along it so they land inside the chart.
    pub inward: Vec2,
}

pub type SeamEdgeList = Vec<SeamEdge>;

fn face_adjacency(mesh: &Mesh) -> HashMap<(u32, u32), Vec<usize>> {
    let mut edges: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let a = f[k];
            let b = f[(k + 1) % 3];
            edges.entry((a.min(b), a.max(b))).or_default().push(fi);
        }
    }
    edges
}

/// Replace the mesh UVs with an automatically extracted atlas.
///
/// Charts grow from the largest unassigned face across shared edges while
/// the candidate normal stays within `theta_max_deg` of the seed normal.
/// Each chart is projected orthographically onto its seed frame, all charts
/// share one global scale, and rectangles are shelf-packed by decreasing
/// height with `padding` texels of gutter on every side (at the 1024
/// reference resolution). Chart-boundary vertices are duplicated so UVs
/// stay per-vertex.
pub fn generate_atlas(mesh: Mesh, theta_max_deg: f32, padding: usize) -> Result<(Mesh, Vec<Chart>)> {
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let cos_max = theta_max_deg.to_radians().cos();
    let nfaces = mesh.faces.len();
    let face_normals: Vec<Vec3> = (0..nfaces).map(|i| mesh.face_normal(i)).collect();
    let face_areas: Vec<f32> = (0..nfaces).map(|i| mesh.face_area(i)).collect();
    let adjacency = face_adjacency(&mesh);

    // Seed order: decreasing area, index as tie-break.
    let mut seed_order: Vec<usize> = (0..nfaces).collect();
    seed_order.sort_by(|&a, &b| {
        face_areas[b]
            .partial_cmp(&face_areas[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut chart_of = vec![usize::MAX; nfaces];
    let mut charts: Vec<Chart> = Vec::new();
    for &seed in &seed_order {
        if chart_of[seed] != usize::MAX {
            continue;
        }
        let id = charts.len();
        let normal = face_normals[seed];
        let mut faces = vec![seed];
        chart_of[seed] = id;
        let mut cursor = 0;
        while cursor < faces.len() {
            let f = mesh.faces[faces[cursor]];
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                for &nb in &adjacency[&(a.min(b), a.max(b))] {
                    if chart_of[nb] == usize::MAX && face_normals[nb].dot(&normal) >= cos_max {
                        chart_of[nb] = id;
                        faces.push(nb);
                    }
                }
            }
            cursor += 1;
        }
        let frame = orthonormal_basis(normal);
        charts.push(Chart {
            faces,
            normal,
            frame,
            uv_rect: (Vec2::zeros(), Vec2::zeros()),
        });
    }

    // Align each chart's in-plane frame to the principal axis of its
    // projected vertices (landscape orientation), which keeps bounding
    // rectangles tight and shelf heights uniform.
    for chart in &mut charts {
        align_frame(chart, &mesh);
    }
    let project = |chart: &Chart, p: Vec3| -> Vec2 {
        Vec2::new(p.dot(&chart.frame.0), p.dot(&chart.frame.1))
    };
    let mut proj_min = vec![Vec2::repeat(f32::INFINITY); charts.len()];
    let mut proj_max = vec![Vec2::repeat(f32::NEG_INFINITY); charts.len()];
    for (ci, chart) in charts.iter().enumerate() {
        for &fi in &chart.faces {
            for &vi in &mesh.faces[fi] {
                let q = project(chart, mesh.vertices[vi as usize]);
                proj_min[ci] = proj_min[ci].inf(&q);
                proj_max[ci] = proj_max[ci].sup(&q);
            }
        }
    }
    let sizes: Vec<Vec2> = (0..charts.len())
        .map(|i| proj_max[i] - proj_min[i])
        .collect();

    let gutter = padding as f32 / REFERENCE_RESOLUTION as f32;
    // Largest packable global scale, found by bisection between the scales
    // whose summed box areas fill 30% and 95% of the square; one final
    // halving before giving up.
    let lo0 = scale_for_fill(&sizes, gutter, 0.30);
    let hi0 = scale_for_fill(&sizes, gutter, 0.95);
    let mut packed = None;
    if let Some(p) = shelf_pack(&sizes, hi0, gutter) {
        packed = Some((hi0, p));
    } else if let Some(p0) = shelf_pack(&sizes, lo0, gutter) {
        let mut lo = lo0;
        let mut best = (lo0, p0);
        let mut hi = hi0;
        for _ in 0..24 {
            let mid = 0.5 * (lo + hi);
            match shelf_pack(&sizes, mid, gutter) {
                Some(p) => {
                    best = (mid, p);
                    lo = mid;
                }
                None => hi = mid,
            }
        }
        packed = Some(best);
    }
    if packed.is_none() {
        let s = lo0 * 0.5;
        packed = shelf_pack(&sizes, s, gutter).map(|p| (s, p));
    }
    let (scale, placements) = packed.ok_or(Error::PackingOverflow)?;
    for (ci, chart) in charts.iter_mut().enumerate() {
        let pos = placements[ci];
        chart.uv_rect = (
            Vec2::new(pos.x + gutter, pos.y + gutter),
            Vec2::new(
                pos.x + gutter + sizes[ci].x * scale,
                pos.y + gutter + sizes[ci].y * scale,
            ),
        );
    }

    // Rebuild the mesh with per-(vertex, chart) duplication and final UVs.
    let mut remap: HashMap<(u32, usize), u32> = HashMap::new();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut normals_in = mesh.normals.clone();
    if normals_in.is_none() {
        let mut m = mesh.clone();
        m.compute_vertex_normals();
        normals_in = m.normals;
    }
    let normals_in = normals_in.unwrap();
    let mut normals: Vec<Vec3> = Vec::new();
    let mut uvs: Vec<Vec2> = Vec::new();
    let mut faces: Vec<[u32; 3]> = vec![[0; 3]; nfaces];

    for (ci, chart) in charts.iter().enumerate() {
        let box_pos = placements[ci];
        for &fi in &chart.faces {
            let mut new_face = [0u32; 3];
            for (slot, &vi) in new_face.iter_mut().zip(&mesh.faces[fi]) {
                let key = (vi, ci);
                let next = vertices.len() as u32;
                *slot = *remap.entry(key).or_insert_with(|| {
                    let p = mesh.vertices[vi as usize];
                    let q = project(chart, p);
                    let uv = Vec2::new(
                        box_pos.x + gutter + (q.x - proj_min[ci].x) * scale,
                        box_pos.y + gutter + (q.y - proj_min[ci].y) * scale,
                    );
                    vertices.push(p);
                    normals.push(normals_in[vi as usize]);
                    uvs.push(uv);
                    next
                });
            }
            faces[fi] = new_face;
        }
    }

    let mut out = Mesh::new(vertices, faces);
    out.uv = Some(uvs);
    out.normals = Some(normals);
    Ok((out, charts))
}

/// Rotate the chart's in-plane axes to the principal direction of its
/// projected vertices, oriented landscape (width >= height). Both steps are
/// orientation-preserving quarter/partial turns about the chart normal.
fn align_frame(chart: &mut Chart, mesh: &Mesh) {
    let (u0, v0) = chart.frame;
    let mut seen = std::collections::BTreeSet::new();
    let mut qs: Vec<Vec2> = Vec::new();
    for &fi in &chart.faces {
        for &vi in &mesh.faces[fi] {
            if seen.insert(vi) {
                let p = mesh.vertices[vi as usize];
                qs.push(Vec2::new(p.dot(&u0), p.dot(&v0)));
            }
        }
    }
    let n = qs.len() as f32;
    let mut c = Vec2::zeros();
    for q in &qs {
        c += q;
    }
    c /= n;
    let (mut sxx, mut sxy, mut syy) = (0.0f32, 0.0f32, 0.0f32);
    for q in &qs {
        let d = q - c;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (s, co) = theta.sin_cos();
    let mut u = u0 * co + v0 * s;
    let mut v = v0 * co - u0 * s;

    // Landscape: principal (widest) extent along u.
    let mut min = Vec2::repeat(f32::INFINITY);
    let mut max = Vec2::repeat(f32::NEG_INFINITY);
    for &fi in &chart.faces {
        for &vi in &mesh.faces[fi] {
            let p = mesh.vertices[vi as usize];
            let q = Vec2::new(p.dot(&u), p.dot(&v));
            min = min.inf(&q);
            max = max.sup(&q);
        }
    }
    if (max - min).y > (max - min).x {
        let new_u = v;
        v = -u;
        u = new_u;
    }
    chart.frame = (u, v);
}

/// Solve for the global scale whose summed box area hits the fill target.
fn scale_for_fill(sizes: &[Vec2], gutter: f32, target: f32) -> f32 {
    let mut a = 0.0f64;
    let mut b = 0.0f64;
    let mut c = 0.0f64;
    for s in sizes {
        a += (s.x as f64) * (s.y as f64);
        b += 2.0 * gutter as f64 * (s.x as f64 + s.y as f64);
        c += 4.0 * (gutter as f64) * (gutter as f64);
    }
    if a <= 1e-20 {
        return 1.0;
    }
    let disc = (b * b - 4.0 * a * (c - target as f64)).max(0.0);
    (((-b + disc.sqrt()) / (2.0 * a)) as f32).max(1e-6)
}

/// Decreasing-height shelf packing into the unit square. Returns box
/// origins (gutter included in the box) or None when the shelves exceed
/// the square.
fn shelf_pack(sizes: &[Vec2], scale: f32, gutter: f32) -> Option<Vec<Vec2>> {
    let boxes: Vec<Vec2> = sizes
        .iter()
        .map(|s| Vec2::new(s.x * scale + 2.0 * gutter, s.y * scale + 2.0 * gutter))
        .collect();
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| {
        boxes[j]
            .y
            .partial_cmp(&boxes[i].y)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let mut placements = vec![Vec2::zeros(); boxes.len()];
    let mut shelf_y = 0.0f32;
    let mut shelf_height = 0.0f32;
    let mut x = 0.0f32;
    for &i in &order {
        let b = boxes[i];
        if b.x > 1.0 || b.y > 1.0 {
            return None;
        }
        if x + b.x > 1.0 {
            shelf_y += shelf_height;
            shelf_height = 0.0;
            x = 0.0;
        }
        if shelf_height == 0.0 {
            shelf_height = b.y;
        }
        if shelf_y + b.y > 1.0 {
            return None;
        }
        placements[i] = Vec2::new(x, shelf_y);
        x += b.x;
    }
    Some(placements)
}

/// Rasterize a chart-id map. Returns the map (-1 for background) and the
/// number of texels claimed by more than one chart.
pub fn rasterize_chart_ids(mesh: &Mesh, charts: &[Chart], resolution: usize) -> (Vec<i32>, usize) {
    let uvs = mesh.uv.as_ref().expect("atlased mesh has UVs");
    let mut ids = vec![-1i32; resolution * resolution];
    let mut overlaps = 0usize;
    let scale = resolution as f32;
    for (ci, chart) in charts.iter().enumerate() {
        for &fi in &chart.faces {
            let f = mesh.faces[fi];
            let tri = [
                [uvs[f[0] as usize].x * scale, uvs[f[0] as usize].y * scale],
                [uvs[f[1] as usize].x * scale, uvs[f[1] as usize].y * scale],
                [uvs[f[2] as usize].x * scale, uvs[f[2] as usize].y * scale],
            ];
            for_each_covered_texel(tri, resolution, |x, y, _| {
                let slot = &mut ids[y * resolution + x];
                if *slot >= 0 && *slot != ci as i32 {
                    overlaps += 1;
                } else {
                    *slot = ci as i32;
                }
            });
        }
    }
    (ids, overlaps)
}

/// Fraction of texels covered by some chart at the given resolution.
pub fn atlas_coverage(mesh: &Mesh, resolution: usize) -> f32 {
    let uvs = match &mesh.uv {
        Some(u) => u,
        None => return 0.0,
    };
    let mut mask = Mask::new(resolution, resolution);
    let scale = resolution as f32;
    for f in &mesh.faces {
        let tri = [
            [uvs[f[0] as usize].x * scale, uvs[f[0] as usize].y * scale],
            [uvs[f[1] as usize].x * scale, uvs[f[1] as usize].y * scale],
            [uvs[f[2] as usize].x * scale, uvs[f[2] as usize].y * scale],
        ];
        for_each_covered_texel(tri, resolution, |x, y, _| mask.set(x, y, true));
    }
    mask.count() as f32 / (resolution * resolution) as f32
}

/// Enumerate mesh edges whose two incident faces land in different charts
/// or at discontiguous UV locations. Edges are identified by vertex
/// position (duplicated chart-boundary vertices collapse back to one edge)
/// and listed only when shared by exactly two faces.
pub fn find_seam_edges(mesh: &Mesh, charts: &[Chart]) -> Result<SeamEdgeList> {
    let uvs = mesh.uv.as_ref().ok_or(Error::MissingUvs)?;

    let mut chart_of = vec![usize::MAX; mesh.faces.len()];
    for (ci, chart) in charts.iter().enumerate() {
        for &fi in &chart.faces {
            chart_of[fi] = ci;
        }
    }

    // Canonical vertex ids keyed by exact position bits.
    let mut canon: HashMap<[u32; 3], u32> = HashMap::new();
    let mut canon_of = Vec::with_capacity(mesh.vertices.len());
    for v in &mesh.vertices {
        let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
        let next = canon.len() as u32;
        canon_of.push(*canon.entry(key).or_insert(next));
    }

    struct Incidence {
        face: usize,
        // Vertex indices of this edge ordered by canonical id.
        va: u32,
        vb: u32,
        // The face's third vertex, defining the inward direction.
        vw: u32,
    }
    let mut edges: HashMap<(u32, u32), Vec<Incidence>> = HashMap::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let a = f[k];
            let b = f[(k + 1) % 3];
            let w = f[(k + 2) % 3];
            let (ca, cb) = (canon_of[a as usize], canon_of[b as usize]);
            if ca == cb {
                continue; // degenerate edge
            }
            let (key, va, vb) = if ca < cb {
                ((ca, cb), a, b)
            } else {
                ((cb, ca), b, a)
            };
            edges
                .entry(key)
                .or_default()
                .push(Incidence { face: fi, va, vb, vw: w });
        }
    }

    let inward_dir = |va: u32, vb: u32, vw: u32| -> Vec2 {
        let a = uvs[va as usize];
        let b = uvs[vb as usize];
        let w = uvs[vw as usize];
        let e = b - a;
        let len2 = e.norm_squared();
        let toward = if len2 > 1e-20 {
            w - (a + e * ((w - a).dot(&e) / len2))
        } else {
            w - a
        };
        let n = toward.norm();
        if n > 1e-12 {
            toward / n
        } else {
            Vec2::zeros()
        }
    };

    let mut keys: Vec<(u32, u32)> = edges.keys().copied().collect();
    keys.sort_unstable();

    let mut seams = Vec::new();
    for key in keys {
        let inc = &edges[&key];
        if inc.len() != 2 {
            continue;
        }
        let (i0, i1) = (&inc[0], &inc[1]);
        let (c0, c1) = (chart_of[i0.face], chart_of[i1.face]);
        let uv_discontinuous = {
            let d0 = (uvs[i0.va as usize] - uvs[i1.va as usize]).norm();
            let d1 = (uvs[i0.vb as usize] - uvs[i1.vb as usize]).norm();
            d0 > 1e-6 || d1 > 1e-6
        };
        if c0 != c1 || uv_discontinuous {
            seams.push(SeamEdge {
                vertices: (i0.va, i0.vb),
                sides: [
                    SeamSide {
                        chart: c0,
                        uv_a: uvs[i0.va as usize],
                        uv_b: uvs[i0.vb as usize],
                        inward: inward_dir(i0.va, i0.vb, i0.vw),
                    },
                    SeamSide {
                        chart: c1,
                        uv_a: uvs[i1.va as usize],
                        uv_b: uvs[i1.vb as usize],
                        inward: inward_dir(i1.va, i1.vb, i1.vw),
                    },
                ],
            });
        }
    }
    Ok(seams)
}
