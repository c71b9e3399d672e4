//! Scanline rasterization of triangles in UV/texel space.
//!
//! Shared by texel-surface-map construction and chart id-map rasterization.
//! Edge functions are evaluated in f64 with a top-left fill rule so texels
//! on shared chart-interior edges are claimed by exactly one triangle.

/// Visit every texel whose center lies inside the triangle given in texel
/// coordinates. The callback receives (x, y, barycentric weights) where the
/// weights refer to the vertices in their original order.
pub(crate) fn for_each_covered_texel(
    tri: [[f32; 2]; 3],
    resolution: usize,
    mut visit: impl FnMut(usize, usize, [f32; 3]),
) {
    let mut p = [
        [tri[0][0] as f64, tri[0][1] as f64],
        [tri[1][0] as f64, tri[1][1] as f64],
        [tri[2][0] as f64, tri[2][1] as f64],
    ];
    // Permutation tracking so barycentrics map back to input order.
    let mut order = [0usize, 1, 2];
    let area2 = edge(p[0], p[1], p[2]);
    if area2 == 0.0 {
        return;
    }
    if area2 < 0.0 {
        p.swap(1, 2);
        order.swap(1, 2);
    }
    let area2 = edge(p[0], p[1], p[2]);

    let min_x = p.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
    let max_x = p.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
    let min_y = p.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min);
    let max_y = p.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max);

    let x0 = (min_x - 0.5).floor().max(0.0) as usize;
    let x1 = ((max_x - 0.5).ceil() as i64).min(resolution as i64 - 1);
    let y0 = (min_y - 0.5).floor().max(0.0) as usize;
    let y1 = ((max_y - 0.5).ceil() as i64).min(resolution as i64 - 1);
    if x1 < 0 || y1 < 0 {
        return;
    }

    for y in y0..=(y1 as usize) {
        let cy = y as f64 + 0.5;
        for x in x0..=(x1 as usize) {
            let cx = x as f64 + 0.5;
            let e0 = edge(p[1], p[2], [cx, cy]);
            let e1 = edge(p[2], p[0], [cx, cy]);
            let e2 = edge(p[0], p[1], [cx, cy]);
            let inside = accept(e0, p[1], p[2]) && accept(e1, p[2], p[0]) && accept(e2, p[0], p[1]);
            if inside {
                let mut bary = [0.0f32; 3];
                bary[order[0]] = (e0 / area2) as f32;
                bary[order[1]] = (e1 / area2) as f32;
                bary[order[2]] = (e2 / area2) as f32;
                visit(x, y, bary);
            }
        }
    }
}

#[inline]
fn edge(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Top-left rule in y-down coordinates: zero-valued edges count as inside
/// only for top edges (horizontal, interior below) and left edges
/// (descending in y).
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
