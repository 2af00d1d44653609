//! Deterministic random-stream derivation.
//!
//! All randomness flows from a single master seed through named sub-streams:
//! `substream(seed, label, index)` yields an independent ChaCha stream keyed
//! by the master seed, with the 64-bit stream id derived from the label and a
//! counter. Adding a new consumer (a new label) never perturbs existing
//! streams, and parallel workers draw disjoint streams by index, so results
//! are seed-deterministic regardless of worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the label bytes; stable across platforms.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// SplitMix64 finalizer, used to decorrelate (label, index) pairs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive the deterministic RNG for `(seed, label, index)`.
pub fn substream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mix(fnv1a(label.as_bytes()) ^ mix(index)));
    rng
}

/// Derive a child master seed for a named repetition of an experiment, so
/// that each repetition owns a full sub-stream space of its own.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    mix(seed ^ fnv1a(label.as_bytes()).rotate_left(17) ^ mix(index))
}
