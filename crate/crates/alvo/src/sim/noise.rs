//! Counter-based pixel noise.
//!
//! Each sample is a pure function of (seed, frame index, pixel coordinates),
//! so renders are bit-identical no matter how the pixel loop is scheduled.

/// splitmix64 finalizer; good avalanche behavior for counter inputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn hash(seed: u64, frame: u64, x: u64, y: u64, lane: u64) -> u64 {
    let mut h = mix(seed ^ 0x5851f42d4c957f2d);
    h = mix(h ^ frame);
    h = mix(h ^ (x << 32 | (y & 0xffff_ffff)));
    h = mix(h ^ y);
    mix(h ^ lane)
}

fn unit_open(bits: u64) -> f64 {
    // (0, 1]: avoids log(0) in Box-Muller.
    ((bits >> 11) as f64 + 1.0) / (1u64 << 53) as f64
}

/// Standard normal draw for one pixel of one frame.
pub fn gaussian(seed: u64, frame: u64, x: u32, y: u32) -> f64 {
    let u1 = unit_open(hash(seed, frame, x as u64, y as u64, 0));
    let u2 = unit_open(hash(seed, frame, x as u64, y as u64, 1));
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniform draw in [0, 1) keyed on two integer cell coordinates, used by
/// speckle textures.
pub fn cell_uniform(seed: u64, cu: i64, cv: i64) -> f64 {
    let h = hash(seed, 0x7465787475726573, cu as u64, cv as u64, 2);
    (h >> 11) as f64 / (1u64 << 53) as f64
}
