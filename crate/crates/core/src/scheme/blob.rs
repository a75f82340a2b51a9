use alloc::vec;
use alloc::vec::Vec;

use crate::bits::{EntryValue, PackedEntries};
use crate::error::{Error, Result};

/// Who a blob belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Owner {
    User(u32),
    /// The operator's table of functional entries.
    Master,
    /// Output of a collusion attack.
    Pirate,
}

impl Owner {
    const MASTER_TAG: u32 = u32::MAX;
    const PIRATE_TAG: u32 = u32::MAX - 1;

    /// 32-bit tag used in file headers.
    pub fn to_tag(self) -> u32 {
        match self {
            Owner::User(u) => u,
            Owner::Master => Self::MASTER_TAG,
            Owner::Pirate => Self::PIRATE_TAG,
        }
    }

    pub fn from_tag(tag: u32) -> Self {
        match tag {
            Self::MASTER_TAG => Owner::Master,
            Self::PIRATE_TAG => Owner::Pirate,
            u => Owner::User(u),
        }
    }
}

/// Anything that can supply blob entries by index (`None` for an erasure).
pub trait EntrySource {
    fn entry_count(&self) -> u64;
    fn entry_width(&self) -> u32;
    fn lookup(&self, index: u64) -> Option<EntryValue>;
}

/// One user's big key: `N` entries of `w` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blob {
    owner: Owner,
    entries: PackedEntries,
}

impl Blob {
    pub fn new(owner: Owner, entries: PackedEntries) -> Self {
        Self { owner, entries }
    }

    pub fn owner(&self) -> Owner {
        self.owner
    }

    pub fn entries(&self) -> &PackedEntries {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut PackedEntries {
        &mut self.entries
    }

    pub(crate) fn set_owner(&mut self, owner: Owner) {
        self.owner = owner;
    }

    pub fn len(&self) -> u64 {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn width(&self) -> u32 {
        self.entries.width()
    }

    /// Entry `i`. Panics when out of range.
    pub fn entry(&self, i: u64) -> EntryValue {
        self.entries.get(i)
    }
}

impl EntrySource for Blob {
    fn entry_count(&self) -> u64 {
        self.len()
    }

    fn entry_width(&self) -> u32 {
        self.width()
    }

    fn lookup(&self, index: u64) -> Option<EntryValue> {
        (index < self.len()).then(|| self.entries.get(index))
    }
}

/// A round key: the addressed entries concatenated in message order.
///
/// Key bit `i*w + j` is bit `j` of the `i`-th addressed entry; bits are
/// packed least significant first into bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct RoundKey {
    bits: u32,
    bytes: Vec<u8>,
}

impl core::fmt::Debug for RoundKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        // key material stays out of logs
        f.debug_struct("RoundKey").field("bits", &self.bits).finish()
    }
}

impl RoundKey {
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

/// Gathers the entries at `indices` from `source` into a key.
///
/// Duplicate indices (multi-use mode) contribute duplicate chunks.
pub fn derive_key<S: EntrySource + ?Sized>(source: &S, indices: &[u64]) -> Result<RoundKey> {
    let width = source.entry_width();
    let bits = indices.len() as u64 * width as u64;
    let mut bytes = vec![0u8; bits.div_ceil(8) as usize];
    let mut cursor = 0u64;
    for &index in indices {
        if index >= source.entry_count() {
            return Err(Error::IndexOutOfRange {
                index,
                len: source.entry_count(),
            });
        }
        let value = source.lookup(index).ok_or(Error::Erased(index))?;
        for j in 0..width {
            if (value >> j) & 1 == 1 {
                bytes[(cursor / 8) as usize] |= 1 << (cursor % 8);
            }
            cursor += 1;
        }
    }
    Ok(RoundKey {
        bits: bits as u32,
        bytes,
    })
}
