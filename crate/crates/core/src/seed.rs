//! Labeled seed splitting. Every random stream in a run is derived from the
//! run seed plus a purpose tag, so streams never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Hash `(seed, tag, parts...)` into a child seed.
pub fn derive(seed: u64, tag: &str, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng(seed: u64, tag: &str, parts: &[&str]) -> Rng {
    Rng::seed_from_u64(derive(seed, tag, parts))
}
