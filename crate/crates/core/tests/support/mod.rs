//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerical code.

#![allow(dead_code)]

pub mod reference;
pub mod spanning;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Standard normals by Box-Muller, from a generator unrelated to the
/// library's streams.
pub fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = std::f64::consts::TAU * u2;
        out.push(r * t.cos());
        out.push(r * t.sin());
    }
    out.truncate(n);
    out
}

pub fn uniforms(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}
