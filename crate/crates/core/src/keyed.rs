//! Order-independent randomness: every draw stream is derived from a hash of
//! `(seed, domain, key)`, so results do not depend on iteration order or on
//! how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn keyed_rng(seed: u64, domain: &str, key: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in [domain, key] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

/// A 64-bit seed for a named sub-purpose of `seed`.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    use rand::Rng;
    keyed_rng(seed, "derive", purpose).random()
}
