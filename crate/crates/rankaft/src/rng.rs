//! Deterministic RNG stream derivation.
//!
//! Every randomized task derives its own generator from `(seed, path)`, where
//! `path` identifies the task (e.g. `[purpose, replicate]`). Parallel and
//! serial runs therefore draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Collapse `(seed, path)` into a single stream seed (splitmix-style mixing).
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    let mut acc = mix(seed ^ GOLDEN);
    for &t in path {
        acc = mix(acc.wrapping_add(GOLDEN).wrapping_add(t));
    }
    acc
}

/// A ChaCha generator for the stream identified by `(seed, path)`.
pub fn stream_rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, path))
}
