//! Seeded random streams.
//!
//! Every generator in the crate is a [`ChaCha8Rng`]: portable, seedable and
//! bit-identical across platforms. A run is driven by one 64-bit seed, and
//! independent streams are derived from it by mixing in integer tags:
//!
//! * `derive_seed(seed, &[tag, ...])` folds each tag into the seed with a
//!   SplitMix64 finalizer, so `(seed, [dim, rep])` and `(seed, [rep, dim])`
//!   give unrelated streams;
//! * `stream(seed, id)` keeps the ChaCha key and selects ChaCha stream `id`,
//!   used for per-component generation inside one dataset.
//!
//! Replicate `r` of a sweep uses `derive_seed(seed, &[..., r])`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
