//! Seeded randomness. All runs use ChaCha8 (`rand_chacha`), whose output
//! stream is fixed across platforms. Sub-streams are derived by mixing a
//! tag into the seed with SplitMix64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, tag)`.
pub fn stream(seed: u64, tag: u64) -> RunRng {
    RunRng::seed_from_u64(splitmix64(seed ^ splitmix64(tag)))
}

/// Uniform index in `0..n` (`n ≥ 1`).
#[inline]
pub fn index(rng: &mut RunRng, n: usize) -> usize {
    rng.gen_range(0..n)
}
