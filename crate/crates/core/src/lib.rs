//! Traceable big-key ("blob") decryption schemes.
//!
//! A blob is a large table of random entries handed to every user of a
//! broadcast system. Each round key is gathered from a few randomly chosen
//! entries; a hidden subset of entries carries a per-user binary
//! fingerprint so that any pirated copy can be traced back to at least one
//! of the users who built it.
//!
//! The crate is `no_std` and needs only `alloc`.
//!
//! * [`combinatorics`]: binomial tails and their inverse, Stirling numbers,
//!   visited-position statistics.
//! * [`tardos`]: the bias-based binary fingerprinting code and accusation.
//! * [`scheme`]: parameters, blobs, control messages, encryption.
//! * [`attack`]: the two-step collusion attack and its outcome measures.
//! * [`analysis`]: closed-form figures of merit and parameter optimisation.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod attack;
pub mod bits;
pub mod combinatorics;
pub mod error;
pub mod rng;
pub mod scheme;
pub mod tardos;

pub use error::{Error, Result};
