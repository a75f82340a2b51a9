use alloc::format;

use crate::bits::MAX_ENTRY_BITS;
use crate::error::{Error, Result};

/// Whether blob entries are consumed once or may be drawn again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Mode {
    SingleUse,
    MultiUse,
}

/// Public system parameters of one deployment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SchemeParams {
    /// Blob size in bits (`entry_count * entry_width`).
    pub blob_bits: u64,
    /// Width of one entry in bits.
    pub entry_width: u32,
    /// Number of entries in the blob.
    pub entry_count: u64,
    /// Round key size in bits (`entries_per_key * entry_width`).
    pub key_bits: u32,
    /// Entries gathered per round key.
    pub entries_per_key: u32,
    /// Number of tracing positions.
    pub tracing_count: u64,
    /// Key length regarded as hard to brute-force.
    pub hard_key_bits: u32,
    /// Tolerated probability that a pirate blob fails to yield the next key.
    pub gamma: f64,
    pub users: u32,
    /// Coalition size the tracing code is sized for.
    pub coalition: u32,
    /// Overall false-accusation probability.
    pub false_positive: f64,
    pub mode: Mode,
}

impl SchemeParams {
    /// Builds a parameter set from the independent quantities; `blob_bits`
    /// and `key_bits` are derived. Other fields take the pay-TV defaults
    /// (`k0 = 96`, `gamma = 0.1`, `P_FP = 2^-10`) and can be edited after.
    pub fn new(
        entry_width: u32,
        entry_count: u64,
        entries_per_key: u32,
        tracing_count: u64,
        mode: Mode,
    ) -> Self {
        Self {
            blob_bits: entry_count * entry_width as u64,
            entry_width,
            entry_count,
            key_bits: entries_per_key * entry_width,
            entries_per_key,
            tracing_count,
            hard_key_bits: 96,
            gamma: 0.1,
            users: 64,
            coalition: 4,
            false_positive: 1.0 / 1024.0,
            mode,
        }
    }

    /// Desk-scale simulation profile: 2^16 one-bit entries, 64 users,
    /// 2^12 tracing positions, 128-bit keys.
    pub fn desk(mode: Mode) -> Self {
        Self::new(1, 1 << 16, 128, 1 << 12, mode)
    }

    /// `ceil(k0 / w)`: missing entries that make the next key hard.
    pub fn missing_threshold(&self) -> u64 {
        crate::combinatorics::missing_entries_threshold(
            self.hard_key_bits as u64,
            self.entry_width as u64,
        )
    }

    /// Entries not used for tracing.
    pub fn functional_count(&self) -> u64 {
        self.entry_count - self.tracing_count
    }

    /// Cutoff of the tracing-code bias distribution, `1 / (300 c0)`.
    pub fn bias_cutoff(&self) -> f64 {
        1.0 / (300.0 * self.coalition as f64)
    }

    /// `U / P_FP`.
    pub fn users_over_false_positive(&self) -> f64 {
        self.users as f64 / self.false_positive
    }

    /// Checks every arithmetic constraint, naming the first one violated.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::InvalidParams(msg));
        if !(1..=MAX_ENTRY_BITS).contains(&self.entry_width) {
            return fail(format!(
                "entry width w must be in 1..={MAX_ENTRY_BITS} (w = {})",
                self.entry_width
            ));
        }
        if self.entry_count == 0 {
            return fail("entry count N must be positive".into());
        }
        if self.entry_count.checked_mul(self.entry_width as u64) != Some(self.blob_bits) {
            return fail(format!(
                "M = N*w violated (M = {}, N = {}, w = {})",
                self.blob_bits, self.entry_count, self.entry_width
            ));
        }
        if self.entries_per_key == 0 {
            return fail("entries per key ell must be positive".into());
        }
        if (self.entries_per_key as u64) * (self.entry_width as u64) != self.key_bits as u64 {
            return fail(format!(
                "k = ell*w violated (k = {}, ell = {}, w = {})",
                self.key_bits, self.entries_per_key, self.entry_width
            ));
        }
        if self.hard_key_bits == 0 || self.hard_key_bits > self.key_bits {
            return fail(format!(
                "0 < k0 <= k violated (k0 = {}, k = {})",
                self.hard_key_bits, self.key_bits
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("0 < gamma < 1 violated (gamma = {})", self.gamma));
        }
        if self.tracing_count >= self.entry_count {
            return fail(format!(
                "t < N violated (t = {}, N = {})",
                self.tracing_count, self.entry_count
            ));
        }
        if self.entries_per_key as u64 > self.entry_count - self.tracing_count {
            return fail(format!(
                "ell <= N - t violated (ell = {}, N - t = {})",
                self.entries_per_key,
                self.entry_count - self.tracing_count
            ));
        }
        if self.users == 0 {
            return fail("user count U must be positive".into());
        }
        if self.coalition == 0 {
            return fail("anticipated coalition c0 must be positive".into());
        }
        if !(self.false_positive > 0.0 && self.false_positive < 1.0) {
            return fail(format!(
                "0 < P_FP < 1 violated (P_FP = {})",
                self.false_positive
            ));
        }
        Ok(())
    }
}
