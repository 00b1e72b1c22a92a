//! Seed tree used by every randomized component.
//!
//! A child seed is `splitmix64(parent ^ splitmix64(tag))`, where `tag` is a
//! 64-bit label: a trial index, a module constant below, or a packed
//! `(level, key)` pair. Children of distinct tags are independent streams, so
//! trials and oracle entries can be generated in any order or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const ORACLE: u64 = 0x6f72_6163_6c65;
pub const GAME: u64 = 0x6761_6d65;
pub const ATTACK: u64 = 0x6174_7461_636b;
pub const SIMHAAR: u64 = 0x7369_6d68;
pub const TOMOGRAPHY: u64 = 0x746f_6d6f;
pub const DESIGN: u64 = 0x6465_7369_676e;
pub const EXPERIMENT: u64 = 0x6578_7074;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(parent: u64, tag: u64) -> u64 {
    splitmix64(parent ^ splitmix64(tag))
}

/// Seed for trial `index` under a master seed.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    derive(derive(master, EXPERIMENT), index)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
