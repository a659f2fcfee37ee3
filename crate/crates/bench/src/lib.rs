//! Shared fixtures for the criterion benchmarks.

use proximity_core::{CacheValue, Embedding};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect()
}

pub fn random_embedding(rng: &mut impl Rng, dim: usize) -> Embedding {
    Embedding::new(random_vec(rng, dim)).expect("uniform samples are finite")
}

pub fn dummy_value(id: u64) -> CacheValue {
    CacheValue::ids_only(vec![id]).expect("single id is unique")
}
