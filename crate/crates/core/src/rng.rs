//! Random-number contract shared by every sampler.
//!
//! * Generator: ChaCha8 (`rand_chacha`) seeded with `seed_from_u64`.
//! * Uniform: the top 53 bits of one `next_u64`, scaled to `[0, 1)`.
//! * Exponential(1): inversion, `-ln(1 - U)`; one uniform per draw.
//! * Standard normal: Marsaglia's polar method, producing pairs.
//! * Gamma: `rand_distr::Gamma` (Marsaglia–Tsang).
//! * Replicate streams: [`derive_seed`] of the master seed and the index.

use rand::{RngCore, SeedableRng};
use rand_distr::Distribution;

use crate::math;

pub type SimRng = rand_chacha::ChaCha8Rng;

pub const NORMAL_METHOD: &str = "marsaglia-polar";
pub const GENERATOR: &str = "chacha8";

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; a bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `replicate` under `master`.
///
/// `mix64(mix64(master) + (replicate + 1) * φ)` with wrapping arithmetic and
/// φ the odd 64-bit golden-ratio constant. For a fixed master the map is a
/// bijection of the replicate index, so seeds never collide within a run.
pub fn derive_seed(master: u64, replicate: u64) -> u64 {
    mix64(
        mix64(master).wrapping_add(replicate.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
    )
}

#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
pub fn exp1<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    -math::log1p(-uniform(rng))
}

/// A pair of independent standard normals (polar method).
pub fn normal_pair<R: RngCore + ?Sized>(rng: &mut R) -> (f64, f64) {
    loop {
        let u = 2.0 * uniform(rng) - 1.0;
        let v = 2.0 * uniform(rng) - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            let f = math::sqrt(-2.0 * math::log(s) / s);
            return (u * f, v * f);
        }
    }
}

/// Fills `out` with standard normals, two per polar draw; an odd tail
/// discards the spare.
pub fn fill_normals<R: RngCore + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = normal_pair(rng);
        pair[0] = a;
        pair[1] = b;
    }
    if let [last] = chunks.into_remainder() {
        *last = normal_pair(rng).0;
    }
}

/// Gamma(shape, 1) draw. `shape` must be positive and finite.
pub fn gamma<R: RngCore + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    rand_distr::Gamma::new(shape, 1.0)
        .expect("gamma shape must be positive")
        .sample(&mut RngAdapter(rng))
}

/// Beta(a, b) as `X / (X + Y)` with `X ~ Gamma(a)` drawn before `Y ~ Gamma(b)`.
pub fn beta<R: RngCore + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let x = gamma(rng, a);
    let y = gamma(rng, b);
    let s = x + y;
    if s > 0.0 {
        x / s
    } else {
        // both gammas underflowed; the ratio is decided by the shapes
        if a >= b {
            1.0
        } else {
            0.0
        }
    }
}

struct RngAdapter<'a, R: RngCore + ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
