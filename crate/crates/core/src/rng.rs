//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a [`PacRng`], a ChaCha8 generator
//! seeded from a 64-bit seed and positioned on a 64-bit stream. Streams are
//! derived from a path of integer identifiers (repeat index, method index, ...)
//! so adding a method to an experiment never shifts the draws of another.
//!
//! The generator choice is part of the release contract: changing it changes
//! every seeded result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PacRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mixes a path of identifiers into a single stream number.
pub fn stream_id(path: &[u64]) -> u64 {
    path.iter()
        .fold(0x6a09_e667_f3bc_c908, |acc, &id| splitmix64(acc ^ splitmix64(id)))
}

/// A generator for `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> PacRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(path));
    rng
}
