//! Seed derivation. Every random stream is keyed by the run seed plus a
//! purpose tag and indices, so results do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 123;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ crate::ingest::fnv1a64(tag.as_bytes()));
    for &i in indices {
        h = splitmix64(h ^ i);
    }
    h
}

pub fn rng(seed: u64, tag: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag, indices))
}
