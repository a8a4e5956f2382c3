//! Seed derivation. Every random stream is a ChaCha8 generator whose seed is
//! derived from a parent seed and a string key, so results never depend on
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let out = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&out[..8]);
    u64::from_le_bytes(b)
}

pub fn rng_for(seed: u64, key: &str) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, key))
}

/// Deterministic value in `[0, 1)` for a key.
pub fn unit_hash(seed: u64, key: &str) -> f64 {
    (derive_seed(seed, key) >> 11) as f64 / (1u64 << 53) as f64
}
