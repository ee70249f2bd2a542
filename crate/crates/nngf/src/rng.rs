//! Counter-based random streams.
//!
//! Every stochastic component draws from a stream keyed by
//! `(master seed, context tags)`. The key is expanded with a SplitMix64
//! chain into a 256-bit ChaCha8 seed, so replicate `r` at depth `L` gets
//! the same stream no matter how work is partitioned across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic stream for `(master, tags)`.
pub fn stream(master: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = master ^ 0xA076_1D64_78BD_642F;
    for &t in tags {
        state ^= splitmix64(&mut { t ^ state });
        splitmix64(&mut state);
        state = state.rotate_left(17) ^ t.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    }
    let mut seed = [0u8; 32];
    let mut s = state;
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Stream for a Monte Carlo replicate: keyed by master seed, depth and
/// replicate index.
pub fn replicate_stream(master: u64, depth: usize, replicate: usize) -> ChaCha8Rng {
    stream(master, &[0x5245_504c, depth as u64, replicate as u64])
}
