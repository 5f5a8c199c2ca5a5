//! Labeled random substreams.
//!
//! Every random draw in the simulator comes from a stream derived from a
//! base seed plus a label such as `(RATE, round, rater, note)`. Streams are
//! independent of the order in which other streams are consumed, so results
//! do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stage tags used as the first label component.
pub mod tag {
    pub const POPULATION: u64 = 0x01;
    pub const FIT_INIT: u64 = 0x10;
    pub const FIT_SHUFFLE: u64 = 0x11;
    pub const INFLUENCE_CAP: u64 = 0x12;
    pub const POSTS: u64 = 0x20;
    pub const WRITE: u64 = 0x21;
    pub const RATE: u64 = 0x30;
    pub const MATCH_VOTE: u64 = 0x31;
    pub const KMEANS: u64 = 0x40;
    pub const RLCF: u64 = 0x41;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the stream for `label` under `seed`.
pub fn substream(seed: u64, label: &[u64]) -> SimRng {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for &part in label {
        state ^= part.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        acc = acc.rotate_left(23) ^ splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        state ^= acc;
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Derives a plain `u64` seed from a label, for APIs that take a seed.
pub fn derive_seed(seed: u64, label: &[u64]) -> u64 {
    use rand::RngCore;
    substream(seed, label).next_u64()
}
