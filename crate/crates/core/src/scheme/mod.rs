//! Blob data structures and both protocol variants.
//!
//! The operator builds one master table of functional entries, hides a
//! tracing code at `t` secret positions, and hands every user a personal
//! copy. Each broadcast names `ell` entries (explicitly or through a short
//! seed); the concatenation of those entries is the round key.

mod blob;
mod cipher;
mod control;
mod operator;
mod params;

pub use blob::{derive_key, Blob, EntrySource, Owner, RoundKey};
pub use cipher::{Aes128Gcm, Ciphertext, KeyedCipher, NONCE_LEN};
pub use control::{
    descriptor_bits, expand_seed, ControlForm, ControlMessage, IndexForm, MAX_SEED_RETRIES,
};
pub use operator::{decrypt, initialise, OperatorState};
pub use params::{Mode, SchemeParams};
