use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Upper bound on the operator's seed retries before giving up.
pub const MAX_SEED_RETRIES: u32 = 1 << 20;

/// How the operator describes the index vector of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlForm {
    #[default]
    Explicit,
    Seeded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexForm {
    /// The `ell` indices themselves.
    Explicit(Vec<u64>),
    /// A seed and the retry counter under which its expansion satisfied all
    /// constraints.
    Seeded { seed: [u8; 16], retry: u32 },
}

/// Broadcast description of the index vector `L` of one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlMessage {
    /// Zero-based round number `n`.
    pub sequence: u64,
    pub form: IndexForm,
}

impl ControlMessage {
    /// Resolves the message to its index vector.
    pub fn indices(&self, entry_count: u64, entries_per_key: u32) -> Result<Vec<u64>> {
        match &self.form {
            IndexForm::Explicit(list) => {
                if list.len() != entries_per_key as usize {
                    return Err(Error::Shape(alloc::format!(
                        "control message lists {} indices, expected {entries_per_key}",
                        list.len()
                    )));
                }
                if let Some(&bad) = list.iter().find(|&&i| i >= entry_count) {
                    return Err(Error::IndexOutOfRange {
                        index: bad,
                        len: entry_count,
                    });
                }
                Ok(list.clone())
            }
            IndexForm::Seeded { seed, retry } => {
                Ok(expand_seed(seed, *retry, entry_count, entries_per_key as usize))
            }
        }
    }

    /// Broadcast cost in bits: a 72-bit header (form tag and sequence
    /// number) plus either `ell * ceil(log2 N)` index bits or a 128-bit seed
    /// and 32-bit retry counter.
    pub fn descriptor_bits(&self, entry_count: u64) -> u64 {
        match &self.form {
            IndexForm::Explicit(list) => descriptor_bits(entry_count, list.len() as u64),
            IndexForm::Seeded { .. } => 72 + 128 + 32,
        }
    }
}

/// Size of an explicit message with `count` indices into `entry_count`
/// entries; see [`ControlMessage::descriptor_bits`].
pub fn descriptor_bits(entry_count: u64, count: u64) -> u64 {
    72 + count * index_bits(entry_count) as u64
}

/// `ceil(log2 N)`, at least 1.
fn index_bits(entry_count: u64) -> u32 {
    if entry_count <= 2 {
        1
    } else {
        64 - (entry_count - 1).leading_zeros()
    }
}

/// Expands `(seed, retry)` into `count` indices in `0..entry_count`.
///
/// A ChaCha20 stream keyed by `SHA-256(label || seed || retry)` yields
/// 64-bit words; each is masked to `ceil(log2 N)` bits and rejected when it
/// is `>= N`.
pub fn expand_seed(seed: &[u8; 16], retry: u32, entry_count: u64, count: usize) -> Vec<u64> {
    let mut h = Sha256::new();
    h.update(b"blob/control-index-prf/v1");
    h.update(seed);
    h.update(retry.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(h.finalize().into());
    let bits = index_bits(entry_count);
    let mask = if bits >= 64 { u64::MAX } else { (1u64 << bits) - 1 };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let candidate = rng.next_u64() & mask;
        if candidate < entry_count {
            out.push(candidate);
        }
    }
    out
}
