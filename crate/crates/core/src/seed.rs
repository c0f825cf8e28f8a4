//! Deterministic seed derivation.
//!
//! Child seeds are a pure function of their parent seed and a list of
//! integer labels, so work can be split across threads in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(parent: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix(parent.wrapping_add(GOLDEN)), |acc, &l| mix(acc ^ mix(l.wrapping_add(GOLDEN))))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
