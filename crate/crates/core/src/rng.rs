//! Seed plumbing. Every stochastic component draws from a `SplitMix64`
//! stream whose seed is derived from a root seed plus stream labels.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

pub type DetRng = SplitMix64;

pub fn rng_from_seed(seed: u64) -> DetRng {
    SplitMix64::seed_from_u64(seed)
}

/// Mixes a root seed with a list of stream labels into a new seed.
pub fn derive_seed(root: u64, labels: &[u64]) -> u64 {
    let mut state = root;
    for &label in labels {
        let mut rng = SplitMix64::seed_from_u64(state ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        state = rng.random::<u64>();
    }
    state
}

/// Stable 64-bit label for a string, used to key RNG streams by name.
pub fn label(name: &str) -> u64 {
    use std::hash::Hasher;
    let mut h = fnv::FnvHasher::default();
    h.write(name.as_bytes());
    h.finish()
}

/// Uniform sample in `[-limit, limit)`.
pub fn uniform_symmetric(rng: &mut DetRng, limit: f64) -> f64 {
    (rng.random::<f64>() * 2.0 - 1.0) * limit
}
