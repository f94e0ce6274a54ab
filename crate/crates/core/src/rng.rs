//! Seeded random-number streams.
//!
//! All randomness in the toolkit flows from a single root seed through
//! named sub-streams, so individual components (fold shuffling, batch
//! sampling, corpus synthesis) are reproducible in isolation: re-running
//! only the sampler with the same root seed draws the same numbers no
//! matter what the fold planner consumed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a deterministic RNG for a named sub-stream of `seed`.
///
/// The stream key is `sha256(seed || ":" || name)`, so distinct names give
/// statistically independent streams.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(b":");
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Hex SHA-256 of a byte string; used for model/config fingerprints.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
