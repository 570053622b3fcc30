//! Seeded random streams.
//!
//! Each random factor of an experiment draws from its own ChaCha stream so
//! that, e.g., changing the noise seed never perturbs the row selection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

pub const ROW_SELECTION: u64 = 0;
pub const SIGN_DIAGONAL: u64 = 1;
pub const MEASUREMENT_NOISE: u64 = 2;
pub const SIGNAL: u64 = 3;
pub const DIVERGENCE_PROBE: u64 = 4;
pub const EVOLUTION: u64 = 5;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for a sub-job (trial, iteration) derived from a parent seed.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian_vec(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}
