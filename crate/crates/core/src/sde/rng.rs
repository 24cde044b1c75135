//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, channel, step, particle)`: the first three are
//! hashed into a ChaCha key and the particle index selects the ChaCha stream. A
//! particle's increments therefore never depend on how many particles exist, on their
//! order, or on which worker evaluates them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Channel used for initial values.
pub const INITIAL_CHANNEL: u64 = u64::MAX;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one `(seed, channel, step, particle)` cell.
#[inline]
pub fn stream(seed: u64, channel: u64, step: u64, particle: u64) -> ChaCha8Rng {
    let key = mix64(mix64(seed ^ mix64(channel)) ^ step);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(particle);
    rng
}
