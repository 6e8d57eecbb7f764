//! Seed derivation for reproducible parallel sampling.
//!
//! Every random stream in the crate comes from a ChaCha8 generator keyed by
//! a 64-bit seed and selected by a stream id, so the numbers a unit of work
//! sees depend only on its coordinates and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id reserved for background subsampling.
pub const BACKGROUND_STREAM: u64 = u64::MAX;

/// Generator for `stream` under `seed`. Distinct streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for a cell at `coords` under `master`.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix(master), |acc, &c| mix(acc ^ mix(c)))
}
