//! Portable seeded randomness.
//!
//! Every stream is a `ChaCha8Rng`. Uniforms use rand's 53-bit `f64`
//! conversion, Gaussians use the cosine branch of Box–Muller (two uniforms
//! per draw, no cached second value), and Bernoulli draws compare one uniform
//! against the success probability. All three are defined bit-for-bit by
//! these rules, so a seed reproduces the same data on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for the top-level stream of `seed`.
pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent sub-stream `index` of `seed`, used for bootstrap replicates
/// so that results do not depend on scheduling order.
pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // stream 0 is the top-level stream
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// A child seed for labelled sub-tasks of a run seeded with `seed`.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    // labels count down from the top so they never meet bootstrap indices
    substream(seed, u64::MAX - 1 - label).gen()
}

/// Uniform on `[0, 1)`.
pub fn uniform(rng: &mut StreamRng) -> f64 {
    rng.gen::<f64>()
}

/// Standard normal via Box–Muller.
pub fn normal(rng: &mut StreamRng) -> f64 {
    let u1 = 1.0 - uniform(rng); // (0, 1]
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn bernoulli(rng: &mut StreamRng, p: f64) -> u8 {
    u8::from(uniform(rng) < p)
}

/// Fisher–Yates permutation of `0..n`.
pub fn permutation(rng: &mut StreamRng, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// `n` row indices drawn uniformly with replacement.
pub fn resample_indices(rng: &mut StreamRng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}
