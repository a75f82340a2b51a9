//! Labeled seed derivation.
//!
//! Every random choice in the library descends from a caller-supplied root
//! seed through a labeled SHA-256 derivation, so that independent streams
//! (per user, per round, per trial) never overlap and reruns are
//! bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_xoshiro::Xoshiro256PlusPlus;
use sha2::{Digest, Sha256};

/// Derives a 32-byte child seed from `root`, a domain `label` and an index.
pub fn derive_seed(root: &[u8], label: &str, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((root.len() as u64).to_le_bytes());
    h.update(root);
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

/// Derives a 16-byte child seed, the width used for broadcast seeds and CLI
/// root seeds.
pub fn derive_seed16(root: &[u8], label: &str, index: u64) -> [u8; 16] {
    let full = derive_seed(root, label, index);
    let mut out = [0u8; 16];
    out.copy_from_slice(&full[..16]);
    out
}

/// Cryptographic-quality stream for key material, codes and broadcast seeds.
pub fn chacha(root: &[u8], label: &str, index: u64) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(derive_seed(root, label, index))
}

/// Fast stream for Monte Carlo work (attack simulation, threshold calibration).
pub fn fast(root: &[u8], label: &str, index: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::from_seed(derive_seed(root, label, index))
}
