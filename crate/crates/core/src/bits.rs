//! Bit-packed storage: fixed-width entry arrays and index bitmaps.

use alloc::vec;
use alloc::vec::Vec;

/// A value of one blob entry. Entries are at most 128 bits wide.
pub type EntryValue = u128;

/// Largest supported entry width in bits.
pub const MAX_ENTRY_BITS: u32 = 128;

#[inline]
fn low_mask(bits: u32) -> u128 {
    if bits >= 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    }
}

/// `len` entries of `width` bits each, packed little-endian into 64-bit words.
///
/// Entry `i` occupies bits `i*width .. (i+1)*width` of the stream, least
/// significant bit first.
#[derive(Clone, PartialEq, Eq)]
pub struct PackedEntries {
    width: u32,
    len: u64,
    words: Vec<u64>,
}

impl core::fmt::Debug for PackedEntries {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("PackedEntries")
            .field("width", &self.width)
            .field("len", &self.len)
            .finish_non_exhaustive()
    }
}

impl PackedEntries {
    /// Zero-filled storage. Panics if `width` is 0 or above 128.
    pub fn zeroed(width: u32, len: u64) -> Self {
        assert!(
            (1..=MAX_ENTRY_BITS).contains(&width),
            "entry width must be in 1..=128"
        );
        let bits = len * width as u64;
        let words = vec![0u64; bits.div_ceil(64) as usize];
        Self { width, len, words }
    }

    /// Rebuilds storage from its little-endian byte image (as produced by
    /// [`PackedEntries::to_le_bytes`]). Returns `None` on a length mismatch.
    pub fn from_le_bytes(width: u32, len: u64, bytes: &[u8]) -> Option<Self> {
        if !(1..=MAX_ENTRY_BITS).contains(&width) {
            return None;
        }
        let bits = len.checked_mul(width as u64)?;
        if bytes.len() as u64 != bits.div_ceil(8) {
            return None;
        }
        let mut out = Self::zeroed(width, len);
        for (i, chunk) in bytes.chunks(8).enumerate() {
            let mut w = [0u8; 8];
            w[..chunk.len()].copy_from_slice(chunk);
            out.words[i] = u64::from_le_bytes(w);
        }
        // padding bits past the end must be zero
        if bits % 64 != 0 {
            let last = (bits / 64) as usize;
            if out.words[last] >> (bits % 64) != 0 {
                return None;
            }
        }
        Some(out)
    }

    /// Byte image of length `ceil(len*width/8)`, zero padded.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let n = (self.len * self.width as u64).div_ceil(8) as usize;
        let mut out = Vec::with_capacity(self.words.len() * 8);
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(n);
        out
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Returns entry `i`. Panics when out of range.
    #[inline]
    pub fn get(&self, i: u64) -> EntryValue {
        assert!(i < self.len, "entry index out of range");
        let mut pos = i * self.width as u64;
        let mut remaining = self.width;
        let mut done = 0u32;
        let mut value: u128 = 0;
        while remaining > 0 {
            let word = (pos / 64) as usize;
            let shift = (pos % 64) as u32;
            let take = remaining.min(64 - shift);
            let chunk = (self.words[word] >> shift) as u128 & low_mask(take);
            value |= chunk << done;
            done += take;
            remaining -= take;
            pos += take as u64;
        }
        value
    }

    /// Stores the low `width` bits of `value` at entry `i`.
    #[inline]
    pub fn set(&mut self, i: u64, value: EntryValue) {
        assert!(i < self.len, "entry index out of range");
        let value = value & low_mask(self.width);
        let mut pos = i * self.width as u64;
        let mut remaining = self.width;
        let mut done = 0u32;
        while remaining > 0 {
            let word = (pos / 64) as usize;
            let shift = (pos % 64) as u32;
            let take = remaining.min(64 - shift);
            let mask = (low_mask(take) as u64) << shift;
            let chunk = ((value >> done) as u64) << shift;
            self.words[word] = (self.words[word] & !mask) | (chunk & mask);
            done += take;
            remaining -= take;
            pos += take as u64;
        }
    }

    /// Returns bit `b` of the whole packed stream.
    #[inline]
    pub fn bit(&self, b: u64) -> bool {
        (self.words[(b / 64) as usize] >> (b % 64)) & 1 == 1
    }
}

/// Masks `value` down to its low `width` bits.
#[inline]
pub fn mask_to_width(value: u128, width: u32) -> u128 {
    value & low_mask(width)
}

/// A set of indices in `0..universe`, stored as a bitmap.
#[derive(Clone, PartialEq, Eq)]
pub struct IndexSet {
    universe: u64,
    count: u64,
    words: Vec<u64>,
}

impl core::fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("IndexSet")
            .field("universe", &self.universe)
            .field("count", &self.count)
            .finish_non_exhaustive()
    }
}

impl IndexSet {
    pub fn new(universe: u64) -> Self {
        Self {
            universe,
            count: 0,
            words: vec![0; universe.div_ceil(64) as usize],
        }
    }

    /// Builds a set from indices; indices outside the universe are ignored.
    pub fn from_indices<I: IntoIterator<Item = u64>>(universe: u64, it: I) -> Self {
        let mut s = Self::new(universe);
        for i in it {
            if i < universe {
                s.insert(i);
            }
        }
        s
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    pub fn contains(&self, i: u64) -> bool {
        i < self.universe && (self.words[(i / 64) as usize] >> (i % 64)) & 1 == 1
    }

    /// Inserts `i`; returns true if it was not already present.
    #[inline]
    pub fn insert(&mut self, i: u64) -> bool {
        assert!(i < self.universe, "index outside set universe");
        let w = &mut self.words[(i / 64) as usize];
        let bit = 1u64 << (i % 64);
        if *w & bit == 0 {
            *w |= bit;
            self.count += 1;
            true
        } else {
            false
        }
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
        self.count = 0;
    }

    /// Iterates members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            core::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let tz = rest.trailing_zeros() as u64;
                    rest &= rest - 1;
                    Some(wi as u64 * 64 + tz)
                }
            })
        })
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & b == 0)
    }
}
