//! Deterministic RNG stream derivation.
//!
//! Every stochastic component (bootstrap replicates, random multi-starts,
//! simulation innovations) derives its own ChaCha8 stream from the run seed
//! plus a stable sequence of purpose tags. Streams are therefore independent
//! of execution order and worker count, which is what makes whole-pipeline
//! output byte-identical across runs.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the SplitMix64 output function. Good avalanche behaviour,
/// cheap, and stable across platforms.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a purpose label, used to turn human-readable tags into
/// well-mixed u64 material.
#[inline]
pub fn label(tag: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derive a sub-seed from a base seed and a sequence of tags.
///
/// Each tag is folded in through SplitMix64, so `derive(s, &[a, b])` and
/// `derive(s, &[b, a])` are unrelated streams.
#[inline]
pub fn derive(base: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(base);
    for t in tags {
        s = splitmix64(s ^ splitmix64(*t));
    }
    s
}

/// Seeded ChaCha8 generator for the given (base seed, tags) combination.
pub fn stream(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, tags))
}
