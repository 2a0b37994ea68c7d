//! Seed derivation and the random generator used throughout the crate.
//!
//! Every random stream is a [`ChaCha8Rng`] seeded (via `seed_from_u64`) with a
//! 64-bit value derived from a parent seed by [`derive`]:
//!
//! ```text
//! derive(parent, tag, parts) =
//!     u64::from_le_bytes(SHA-256(parent_le8 || tag_utf8 || 0x00 || part0_le8 || part1_le8 || ...)[0..8])
//! ```
//!
//! The derivation depends only on its inputs, so any stream can be
//! regenerated from the master seed alone, independent of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The generator used for every stochastic component.
pub type StreamRng = ChaCha8Rng;

/// Derives a child seed from `parent`, a domain tag and integer coordinates.
pub fn derive(parent: u64, tag: &str, parts: &[u64]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(parent.to_le_bytes());
    hasher.update(tag.as_bytes());
    hasher.update([0u8]);
    for part in parts {
        hasher.update(part.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

/// Generator seeded directly from `seed`.
pub fn rng(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shorthand for `rng(derive(parent, tag, parts))`.
pub fn stream(parent: u64, tag: &str, parts: &[u64]) -> StreamRng {
    rng(derive(parent, tag, parts))
}
