//! Seeded randomness helpers. All randomness in the crate flows through a
//! ChaCha8 stream so that a single seed reproduces every draw.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent sub-seed from a base seed and a salt (splitmix64 round).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed
        .wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// n x p matrix of standard normal draws, filled row-major.
pub fn standard_normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    Array2::from_shape_vec((n, p), data).expect("shape matches data length")
}

pub fn standard_normal_vector(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}
