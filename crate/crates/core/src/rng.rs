//! Project-wide random number generation.
//!
//! Every stochastic component draws from [`QhbmRng`], a ChaCha8 stream seeded
//! from a `u64` through `rand_chacha`'s `seed_from_u64`. Uniform reals take the
//! top 53 bits of one `next_u64` output and scale by 2^-53, so a given seed
//! reproduces the same doubles on every platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type QhbmRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> QhbmRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on [0, 1).
pub fn uniform01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on [lo, hi).
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(rng)
}

pub fn uniform_vec<R: RngCore + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| uniform(rng, lo, hi)).collect()
}

/// Standard normal via Box-Muller on the 53-bit uniforms.
pub fn normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1 = 1.0 - uniform01(rng);
    let u2 = uniform01(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
