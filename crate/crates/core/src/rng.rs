//! Seed derivation.
//!
//! Every random stream in a build is keyed by the root seed plus a path of
//! stream labels (section index, cluster index, restart number, ...). Child
//! seeds are produced by a splitmix64 finalizer over the path, so two streams
//! never depend on how many values a sibling stream consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Labels for the top-level streams.
pub mod stream {
    pub const SECTION: u64 = 0x5345_4354;
    pub const COARSE: u64 = 0x434f_4152;
    pub const CLUSTER: u64 = 0x434c_5553;
    pub const SCALARS: u64 = 0x5343_414c;
    pub const INIT: u64 = 0x494e_4954;
    pub const RESTART: u64 = 0x5245_5354;
    pub const POWER: u64 = 0x504f_5745;
    pub const DATA: u64 = 0x4441_5441;
    pub const QUERIES: u64 = 0x5155_4552;
    pub const BASELINE: u64 = 0x4241_5345;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a path of stream labels.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &label| {
        splitmix64(acc ^ splitmix64(label))
    })
}

pub fn rng_for(seed: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, path))
}
