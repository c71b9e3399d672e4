fn main() {
    for (name, mesh) in [
        ("cube", gen3d::primitives::unit_cube()),
        ("icosphere", gen3d::primitives::icosphere(3, 0.4)),
        ("torus", gen3d::primitives::torus(0.3, 0.15, 48, 24)),
    ] {
        let (out, charts) = gen3d::atlas::generate_atlas(mesh, 45.0, 4).unwrap();
        let cov = gen3d::atlas::atlas_coverage(&out, 512);
        let (_, ov) = gen3d::atlas::rasterize_chart_ids(&out, &charts, 1024);
        println!("{name}: charts={} coverage={cov:.4} overlaps={ov}", charts.len());
    }
}
