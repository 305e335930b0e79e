//! Seed derivation. Every consumer of randomness gets its own ChaCha8 stream
//! whose seed is a SplitMix64 mix of the base seed and a stream tag, so adding
//! draws to one stream never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 output step for state `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the tag bytes; keeps stream tags readable at call sites.
fn tag_hash(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3))
}

pub fn stream_seed(base: u64, tag: &str) -> u64 {
    splitmix64(splitmix64(base) ^ tag_hash(tag))
}

pub fn stream_rng(base: u64, tag: &str) -> StreamRng {
    ChaCha8Rng::seed_from_u64(stream_seed(base, tag))
}

/// Stream for the `index`-th member of a family (trees, grid points, folds).
pub fn indexed_rng(base: u64, tag: &str, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(splitmix64(stream_seed(base, tag) ^ splitmix64(index)))
}
