//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by a seed mixed from a parent seed and one or more indices, so work
//! can be split across threads without sharing generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes `parent` with each index in turn.
pub fn derive(parent: u64, indices: &[u64]) -> u64 {
    indices.iter().fold(splitmix64(parent), |acc, &i| splitmix64(acc ^ splitmix64(i)))
}

pub fn rng_from(parent: u64, indices: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive(parent, indices))
}
