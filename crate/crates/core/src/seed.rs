//! Deterministic seed derivation.
//!
//! Every random stream is a ChaCha8 generator keyed by a SHA-256 digest of
//! `(master seed, index, label)`, so trials can run on any thread in any
//! order and still draw the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn digest(seed: u64, index: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(index.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    let out = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(out.as_slice());
    bytes
}

/// Child seed for stream `(index, label)` under `master`.
pub fn derive_seed(master: u64, index: u64, label: &str) -> u64 {
    let b = digest(master, index, label);
    u64::from_le_bytes(b[..8].try_into().expect("8 bytes"))
}

/// Generator for `(seed, label)`.
pub fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(digest(seed, u64::MAX, label))
}
