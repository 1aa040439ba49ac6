//! Seeded random streams.
//!
//! Every random draw comes from a ChaCha20 keystream addressed by a 64-bit seed
//! and a stream id, so any trial can be regenerated independently of the order
//! in which trials execute.

#[allow(unused_imports)]
use num_traits::Float;
use crate::linalg::{c64, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub const CHANNEL_STREAM: u64 = 1;
pub const TRANSMIT_STREAM: u64 = 2;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of Monte Carlo trial `trial` under a sweep-level base seed.
#[inline]
pub fn trial_seed(base_seed: u64, trial: u64) -> u64 {
    base_seed ^ trial
}

/// Circularly-symmetric complex Gaussian draw with total variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(s * re, s * im)
}
