//! Deterministic stream derivation for trajectory ensembles.
//!
//! Trajectory `i` of an ensemble draws from a ChaCha8 stream whose seed is a
//! splitmix64 mix of `(master_seed, i)`, so streams are independent of
//! execution order and thread count.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed for trajectory `index` of an ensemble keyed by `master_seed`.
pub fn stream_seed(master_seed: u64, index: u64) -> u64 {
    let mut state = master_seed ^ index.wrapping_mul(0xd1342543de82ef95);
    splitmix64(&mut state)
}

/// Random stream for a single trajectory.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}
