//! Seeding helpers.
//!
//! All randomness flows through [`ChaCha8Rng`], whose output stream is fixed by its
//! published algorithm and therefore identical across platforms. Independent streams are
//! derived from a base seed and a path of integer tags with SplitMix64 mixing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes `tags` into `base`; distinct tag paths give unrelated seeds.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Stable 64-bit tag for a string (FNV-1a).
pub fn tag(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn rng_from(base: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, tags))
}

pub fn standard_normal_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
