//! Per-item seed derivation. Every random choice in the pipeline is drawn
//! from a generator seeded by hashing the global seed with item identifiers,
//! so results do not depend on processing order or worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Stable 32-byte seed for `(seed, parts...)`. Parts are length-prefixed so
/// `("ab", "c")` and `("a", "bc")` differ.
pub fn derive_seed(seed: u64, parts: &[&str]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in parts {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.finalize().into()
}

pub fn item_rng(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(seed, parts))
}
