//! Seed derivation. Every random draw in the crate comes from a ChaCha stream
//! whose seed is derived from a run seed and a stable stream name, so adding
//! a new stream never perturbs an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed from `(seed, name)` with FNV-1a over the name followed
/// by a splitmix64 finalizer.
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

/// Sub-seed for an indexed item (a target user, a fold, a tree) inside a named stream.
pub fn indexed_seed(seed: u64, name: &str, index: u64) -> u64 {
    splitmix64(sub_seed(seed, name) ^ splitmix64(index.wrapping_add(1)))
}

pub fn stream(seed: u64, name: &str) -> Rng {
    Rng::seed_from_u64(sub_seed(seed, name))
}

pub fn indexed_stream(seed: u64, name: &str, index: u64) -> Rng {
    Rng::seed_from_u64(indexed_seed(seed, name, index))
}
