//! Seeded random streams.
//!
//! Every consumer draws from a [`Xoshiro256PlusPlus`] keyed by `(seed, stream)`.
//! Samplers use the sample or path index as the stream, so generated data does
//! not depend on the order (or thread) in which the indices are visited.
//! Normal variates use the Box–Muller transform, taking the cosine branch only.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let key = mix64(seed ^ mix64(stream.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    Xoshiro256PlusPlus::seed_from_u64(key)
}

/// Seed for sweep cell `index` derived from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    base ^ index
}

/// Uniform on `[lo, hi)`.
pub fn uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

/// Standard normal via Box–Muller.
pub fn standard_normal(rng: &mut StreamRng) -> f64 {
    // 1 - u lies in (0, 1], keeping the logarithm finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
