use alloc::format;
use alloc::vec::Vec;

use aes_gcm::aead::Aead;
use aes_gcm::{KeyInit, Nonce};

use super::control::ControlMessage;
use crate::error::{Error, Result};

/// Nonce length shared by every cipher plugged into the scheme.
pub const NONCE_LEN: usize = 12;

/// An authenticated symmetric cipher keyed by a blob round key.
pub trait KeyedCipher {
    /// Exact key length the cipher consumes. Parameter sets must match it.
    fn key_bits(&self) -> u32;

    fn seal(&self, key: &[u8], nonce: &[u8; NONCE_LEN], plaintext: &[u8]) -> Result<Vec<u8>>;

    /// Fails with [`Error::Authentication`] on any tampering or wrong key.
    fn open(&self, key: &[u8], nonce: &[u8; NONCE_LEN], ciphertext: &[u8]) -> Result<Vec<u8>>;
}

/// AES-128 in Galois/counter mode.
#[derive(Debug, Clone, Copy, Default)]
pub struct Aes128Gcm;

impl Aes128Gcm {
    fn instance(key: &[u8]) -> Result<aes_gcm::Aes128Gcm> {
        aes_gcm::Aes128Gcm::new_from_slice(key).map_err(|_| {
            Error::InvalidParams(format!("AES-128-GCM needs a 16-byte key, got {}", key.len()))
        })
    }
}

impl KeyedCipher for Aes128Gcm {
    fn key_bits(&self) -> u32 {
        128
    }

    fn seal(&self, key: &[u8], nonce: &[u8; NONCE_LEN], plaintext: &[u8]) -> Result<Vec<u8>> {
        Self::instance(key)?
            .encrypt(Nonce::from_slice(nonce), plaintext)
            .map_err(|_| Error::Authentication)
    }

    fn open(&self, key: &[u8], nonce: &[u8; NONCE_LEN], ciphertext: &[u8]) -> Result<Vec<u8>> {
        Self::instance(key)?
            .decrypt(Nonce::from_slice(nonce), ciphertext)
            .map_err(|_| Error::Authentication)
    }
}

/// A broadcast: authenticated payload plus the description of its key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub nonce: [u8; NONCE_LEN],
    pub payload: Vec<u8>,
    pub control: ControlMessage,
}
