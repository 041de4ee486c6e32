//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by a base seed and a list of stream indices, so results do not depend
//! on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, streams: &[u64]) -> u64 {
    streams.iter().fold(splitmix64(seed), |acc, &s| splitmix64(acc ^ splitmix64(s.wrapping_add(0x632b_e59b_d9b4_e019))))
}

pub fn rng_for(seed: u64, streams: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, streams))
}
