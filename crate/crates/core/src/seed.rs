//! Named deterministic substreams of a master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeedStream = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Mixes `seed` and `label` into a 256-bit ChaCha key.
///
/// Identical `(seed, label)` pairs always give the same stream within a build.
pub fn derive_stream(seed: u64, label: &str) -> SeedStream {
    let mut state = splitmix64(seed ^ splitmix64(fnv1a(label)));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// `derive_stream` with an indexed label, e.g. one stream per trial.
pub fn derive_indexed(seed: u64, label: &str, index: u64) -> SeedStream {
    let mut state = splitmix64(seed ^ splitmix64(fnv1a(label)));
    state = splitmix64(state ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
