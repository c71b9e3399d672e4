//! Small math helpers shared across modules.

use nalgebra::{Vector2, Vector3};

pub type Vec2 = Vector2<f32>;
pub type Vec3 = Vector3<f32>;

/// Build a deterministic right-handed orthonormal basis (u, v) perpendicular
/// to `n`. `n` must be unit length.
pub fn orthonormal_basis(n: Vec3) -> (Vec3, Vec3) {
    // Pick the world axis least aligned with n as the helper vector.
    let ax = n.x.abs();
    let ay = n.y.abs();
    let az = n.z.abs();
    let helper = if ax <= ay && ax <= az {
        Vec3::new(1.0, 0.0, 0.0)
    } else if ay <= az {
        Vec3::new(0.0, 1.0, 0.0)
    } else {
        Vec3::new(0.0, 0.0, 1.0)
    };
    let u = helper.cross(&n).normalize();
    let v = n.cross(&u);
    (u, v)
}

/// Area of the 3D triangle (a, b, c).
pub fn triangle_area(a: Vec3, b: Vec3, c: Vec3) -> f32 {
    (b - a).cross(&(c - a)).norm() * 0.5
}

/// splitmix64: tiny, high-quality, platform-stable mixer used wherever we need
/// seeded pseudo-randomness without pulling in an RNG dependency.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Map a u64 to a float in [0, 1).
pub fn unit_f32(h: u64) -> f32 {
    ((h >> 40) as f32) / (1u64 << 24) as f32
}

/// FNV-1a hash of a byte string; used to derive seeds from prompt text.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1_0000_0000_01b3);
    }
    h
}

pub fn clamp01(x: f32) -> f32 {
    x.clamp(0.0, 1.0)
}
