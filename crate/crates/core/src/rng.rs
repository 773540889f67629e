//! Seed plumbing. One run seed fans out into independent named streams
//! so that adding a consumer never shifts the draws of another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purpose-tagged random streams derived from a single run seed.
/// Each tag selects a distinct ChaCha stream of the same key, so the
/// streams are independent and individually reproducible.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    WeightInit = 1,
    Batches = 2,
    Reparam = 3,
    InfoPlane = 4,
    CloudJitter = 5,
    Data = 6,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Standard normal draw via Box-Muller. Two uniforms per call keeps the
/// stream layout independent of any cached second value.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

/// Uniform draw from `[-b, b]`.
pub fn uniform_sym(rng: &mut ChaCha8Rng, b: f64) -> f64 {
    rng.gen_range(-b..b)
}

/// Uniform draw from `[0, 1)`.
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen::<f64>()
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut ChaCha8Rng, xs: &mut [T]) {
    for i in (1..xs.len()).rev() {
        let j = rng.gen_range(0..=i);
        xs.swap(i, j);
    }
}
