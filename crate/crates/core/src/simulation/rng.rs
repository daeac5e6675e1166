//! Counter-based random streams: every (seed, tag, index) triple owns an
//! independent ChaCha8 stream, so results never depend on scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream tags that keep unrelated consumers of one master seed apart.
pub mod tag {
    pub const REPLICATE: u64 = 1;
    pub const BAYES: u64 = 2;
    pub const CALIBRATION: u64 = 3;
    pub const KENDALL: u64 = 4;
    pub const DISTRIBUTION: u64 = 5;
    pub const TEST: u64 = 6;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes two words into one; used to derive child seeds.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut s = a ^ b.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    splitmix64(&mut s)
}

pub fn substream(seed: u64, tag: u64, index: u64) -> StreamRng {
    let mut state = mix(seed, tag);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
