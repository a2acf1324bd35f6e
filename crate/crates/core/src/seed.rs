//! Seed expansion.
//!
//! One master seed per run; every component draws its own seed with
//! [`derive`], a splitmix64 step keyed by a stream label. Streams are
//! independent of evaluation order, so sub-experiments reproduce in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One splitmix64 output for `state`.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `stream` of `master`.
pub fn derive(master: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(stream.wrapping_add(0x6A09_E667_F3BC_C909)))
}

/// Seed for a named component, e.g. `derive_named(seed, "variance-sweep")`.
pub fn derive_named(master: u64, label: &str) -> u64 {
    // FNV-1a over the label
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    derive(master, h)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
