//! Seed derivation for independent, order-free random streams.
//!
//! Every consumer of randomness gets a ChaCha stream keyed by
//! `(master seed, stream index)`, so results never depend on which thread
//! touched which series first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
}

pub fn stream(master: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, index))
}
