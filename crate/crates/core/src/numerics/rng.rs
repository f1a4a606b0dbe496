//! Seed derivation for reproducible runs.
//!
//! Every source of randomness in a run (init, shuffling, dropout masks,
//! augmentation, sampling) draws from its own ChaCha stream derived from the
//! run seed and a purpose tag, so results are independent of evaluation
//! order and thread schedule.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives a child seed from a run seed and a purpose tag (FNV-style mix
/// followed by a splitmix64 finalizer).
pub fn subseed(seed: u64, tag: &str) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &b in tag.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    // splitmix64 finalizer
    h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
    h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^ (h >> 31)
}

/// A ChaCha stream for one purpose within a run.
pub fn stream(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subseed(seed, tag))
}
