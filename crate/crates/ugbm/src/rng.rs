//! Deterministic seed derivation.
//!
//! All randomized components (per-tree partitions, per-node subsample
//! masks, demo repetitions) draw from ChaCha streams derived from a user
//! seed plus structural coordinates, so results never depend on execution
//! order or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; decorrelates consecutive seeds.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a stream coordinate into a seed.
#[inline]
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ stream.wrapping_mul(0xa076_1d64_78bd_642f))
}

/// ChaCha generator for a seed plus a path of stream coordinates.
///
/// `stream_rng(s, &[a, b])` and `stream_rng(s, &[b, a])` are unrelated
/// streams, which is what keeps parallel loops reproducible.
pub fn stream_rng(seed: u64, streams: &[u64]) -> ChaCha8Rng {
    let mut s = splitmix64(seed);
    for &coord in streams {
        s = mix_seed(s, coord);
    }
    ChaCha8Rng::seed_from_u64(s)
}
