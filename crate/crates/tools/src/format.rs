//! Versioned little-endian binary formats for blobs, pirate blobs, tracing
//! codes, operator state and control messages.

use blob_core::attack::PirateBlob;
use blob_core::bits::{IndexSet, PackedEntries, MAX_ENTRY_BITS};
use blob_core::scheme::{Blob, ControlForm, ControlMessage, IndexForm, Owner, SchemeParams};
use blob_core::tardos::TracingCode;
use sha2::{Digest, Sha256};

pub const FORMAT_VERSION: u16 = 1;

pub const BLOB_MAGIC: &[u8; 4] = b"BLOB";
pub const PIRATE_MAGIC: &[u8; 4] = b"BLBP";
pub const CODE_MAGIC: &[u8; 4] = b"BLTC";
pub const STATE_MAGIC: &[u8; 4] = b"BLOS";

const TAG_EXPLICIT: u8 = 0;
const TAG_SEEDED: u8 = 1;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("expected magic {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("file truncated")]
    Truncated,
    #[error("{0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, FormatError>;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(FormatError::Truncated)?;
        let out = self.bytes.get(self.pos..end).ok_or(FormatError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    /// Length that must still fit in the remaining input (at `unit` bytes
    /// per element), so corrupt counts fail before allocating.
    fn count(&mut self, unit: usize) -> Result<usize> {
        let n = self.u64()?;
        let left = (self.bytes.len() - self.pos) as u64;
        if n.checked_mul(unit as u64).is_none_or(|b| b > left) {
            return Err(FormatError::Truncated);
        }
        Ok(n as usize)
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let found = self.array::<4>()?;
        if &found != magic {
            return Err(FormatError::BadMagic {
                expected: String::from_utf8_lossy(magic).into_owned(),
                found: String::from_utf8_lossy(&found).into_owned(),
            });
        }
        match self.u16()? {
            FORMAT_VERSION => Ok(()),
            v => Err(FormatError::UnsupportedVersion(v)),
        }
    }

    fn finish(&self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(FormatError::Invalid(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )))
        }
    }
}

fn header(out: &mut Vec<u8>, magic: &[u8; 4]) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
}

fn width_u16(width: u32) -> u16 {
    width as u16
}

fn read_width(r: &mut Reader) -> Result<u32> {
    let w = r.u16()? as u32;
    if !(1..=MAX_ENTRY_BITS).contains(&w) {
        return Err(FormatError::Invalid(format!("entry width {w} outside 1..=128")));
    }
    Ok(w)
}

fn read_entries(r: &mut Reader, width: u32, len: u64) -> Result<PackedEntries> {
    let bytes = len
        .checked_mul(width as u64)
        .ok_or(FormatError::Truncated)?
        .div_ceil(8);
    let raw = r.take(usize::try_from(bytes).map_err(|_| FormatError::Truncated)?)?;
    PackedEntries::from_le_bytes(width, len, raw)
        .ok_or_else(|| FormatError::Invalid("nonzero padding after the last entry".into()))
}

fn bitmap_bytes(set: &IndexSet) -> Vec<u8> {
    let mut out = vec![0u8; set.universe().div_ceil(8) as usize];
    for i in set.iter() {
        out[(i / 8) as usize] |= 1 << (i % 8);
    }
    out
}

fn read_bitmap(r: &mut Reader, universe: u64) -> Result<IndexSet> {
    let raw = r.take(universe.div_ceil(8) as usize)?;
    let mut set = IndexSet::new(universe);
    for (byte_ix, &b) in raw.iter().enumerate() {
        for bit in 0..8 {
            if b >> bit & 1 == 1 {
                let i = byte_ix as u64 * 8 + bit;
                if i >= universe {
                    return Err(FormatError::Invalid("bitmap padding bits set".into()));
                }
                set.insert(i);
            }
        }
    }
    Ok(set)
}

/// `BLOB | version | N u64 | w u16 | owner u32 | packed entries`.
pub fn encode_blob(blob: &Blob) -> Vec<u8> {
    let payload = blob.entries().to_le_bytes();
    let mut out = Vec::with_capacity(20 + payload.len());
    header(&mut out, BLOB_MAGIC);
    out.extend_from_slice(&blob.len().to_le_bytes());
    out.extend_from_slice(&width_u16(blob.width()).to_le_bytes());
    out.extend_from_slice(&blob.owner().to_tag().to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

pub fn decode_blob(bytes: &[u8]) -> Result<Blob> {
    let mut r = Reader::new(bytes);
    r.header(BLOB_MAGIC)?;
    let n = r.u64()?;
    let w = read_width(&mut r)?;
    let owner = Owner::from_tag(r.u32()?);
    let entries = read_entries(&mut r, w, n)?;
    r.finish()?;
    Ok(Blob::new(owner, entries))
}

/// `BLBP | version | N | w | owner | packed entries | erasure bitmap |
/// detected count u64 | detected u64...`.
pub fn encode_pirate(pirate: &PirateBlob) -> Vec<u8> {
    let entries = pirate.entries();
    let mut out = Vec::new();
    header(&mut out, PIRATE_MAGIC);
    out.extend_from_slice(&entries.len().to_le_bytes());
    out.extend_from_slice(&width_u16(entries.width()).to_le_bytes());
    out.extend_from_slice(&Owner::Pirate.to_tag().to_le_bytes());
    out.extend_from_slice(&entries.to_le_bytes());
    out.extend_from_slice(&bitmap_bytes(pirate.erased()));
    out.extend_from_slice(&(pirate.detected().len() as u64).to_le_bytes());
    for &d in pirate.detected() {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out
}

pub fn decode_pirate(bytes: &[u8]) -> Result<PirateBlob> {
    let mut r = Reader::new(bytes);
    r.header(PIRATE_MAGIC)?;
    let n = r.u64()?;
    let w = read_width(&mut r)?;
    let _owner = r.u32()?;
    let entries = read_entries(&mut r, w, n)?;
    let erased = read_bitmap(&mut r, n)?;
    let count = r.count(8)?;
    let detected = (0..count).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    if erased.iter().any(|i| entries.get(i) != 0) {
        return Err(FormatError::Invalid("erased entries must be stored as zero".into()));
    }
    PirateBlob::from_parts(entries, erased, detected).map_err(|e| FormatError::Invalid(e.to_string()))
}

fn value_bytes(width: u32) -> usize {
    width.div_ceil(8) as usize
}

/// `BLTC | version | N u64 | t u64 | U u64 | w u16 | cutoff f64 |
/// positions u64 x t | biases f64 x t | alphabet 2 x ceil(w/8) bytes x t |
/// codewords ceil(t/8) bytes x U`.
pub fn encode_code(code: &TracingCode) -> Vec<u8> {
    let t = code.len();
    let mut out = Vec::new();
    header(&mut out, CODE_MAGIC);
    out.extend_from_slice(&code.entry_count().to_le_bytes());
    out.extend_from_slice(&(t as u64).to_le_bytes());
    out.extend_from_slice(&(code.users() as u64).to_le_bytes());
    out.extend_from_slice(&width_u16(code.entry_width()).to_le_bytes());
    out.extend_from_slice(&code.cutoff().to_le_bytes());
    for &p in code.positions() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    for &b in code.biases() {
        out.extend_from_slice(&b.to_le_bytes());
    }
    let vb = value_bytes(code.entry_width());
    for pair in code.alphabet() {
        for v in pair {
            out.extend_from_slice(&v.to_le_bytes()[..vb]);
        }
    }
    let stride = t.div_ceil(64);
    let row_bytes = t.div_ceil(8);
    for row in code.codeword_words().chunks(stride.max(1)).take(code.users() as usize) {
        let mut bytes: Vec<u8> = row.iter().flat_map(|w| w.to_le_bytes()).collect();
        bytes.truncate(row_bytes);
        out.extend_from_slice(&bytes);
    }
    out
}

pub fn decode_code(bytes: &[u8]) -> Result<TracingCode> {
    let mut r = Reader::new(bytes);
    r.header(CODE_MAGIC)?;
    let n = r.u64()?;
    let t = r.u64()?;
    let users = u32::try_from(r.u64()?).map_err(|_| FormatError::Invalid("too many users".into()))?;
    let w = read_width(&mut r)?;
    let cutoff = r.f64()?;
    let need = t.checked_mul(16).ok_or(FormatError::Truncated)?;
    if need > bytes.len() as u64 {
        return Err(FormatError::Truncated);
    }
    let t = t as usize;
    let positions = (0..t).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
    let biases = (0..t).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let vb = value_bytes(w);
    let mut alphabet = Vec::with_capacity(t);
    for _ in 0..t {
        let mut pair = [0u128; 2];
        for v in &mut pair {
            let mut buf = [0u8; 16];
            buf[..vb].copy_from_slice(r.take(vb)?);
            *v = u128::from_le_bytes(buf);
        }
        alphabet.push(pair);
    }
    let stride = t.div_ceil(64);
    let row_bytes = t.div_ceil(8);
    let mut codewords = Vec::with_capacity(stride * users as usize);
    for _ in 0..users {
        let raw = r.take(row_bytes)?;
        let mut padded = raw.to_vec();
        padded.resize(stride * 8, 0);
        codewords.extend(padded.chunks(8).map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes"))));
        if t % 8 != 0 && raw.last().is_some_and(|b| b >> (t % 8) != 0) {
            return Err(FormatError::Invalid("codeword padding bits set".into()));
        }
    }
    r.finish()?;
    TracingCode::from_parts(n, w, users, cutoff, positions, biases, alphabet, codewords)
        .map_err(|e| FormatError::Invalid(e.to_string()))
}

/// Wire form of a control message: `tag u8 | sequence u64 |` then either
/// `ell x u64` indices or `seed [16] | retry u32`.
pub fn encode_control(msg: &ControlMessage) -> Vec<u8> {
    let mut out = Vec::new();
    match &msg.form {
        IndexForm::Explicit(list) => {
            out.push(TAG_EXPLICIT);
            out.extend_from_slice(&msg.sequence.to_le_bytes());
            for &i in list {
                out.extend_from_slice(&i.to_le_bytes());
            }
        }
        IndexForm::Seeded { seed, retry } => {
            out.push(TAG_SEEDED);
            out.extend_from_slice(&msg.sequence.to_le_bytes());
            out.extend_from_slice(seed);
            out.extend_from_slice(&retry.to_le_bytes());
        }
    }
    out
}

/// Decodes a control message; `ell` fixes the explicit list length.
pub fn decode_control(bytes: &[u8], ell: u32) -> Result<ControlMessage> {
    let mut r = Reader::new(bytes);
    let tag = r.u8()?;
    let sequence = r.u64()?;
    let form = match tag {
        TAG_EXPLICIT => IndexForm::Explicit((0..ell).map(|_| r.u64()).collect::<Result<_>>()?),
        TAG_SEEDED => IndexForm::Seeded {
            seed: r.array()?,
            retry: r.u32()?,
        },
        other => return Err(FormatError::Invalid(format!("unknown control form tag {other}"))),
    };
    r.finish()?;
    Ok(ControlMessage { sequence, form })
}

/// Operator bookkeeping between runs. The tracing code and master blob live
/// in their own files and are pinned here by SHA-256.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFile {
    pub params: SchemeParams,
    pub form: ControlForm,
    pub issued: u64,
    pub code_digest: [u8; 32],
    pub master_digest: [u8; 32],
    /// Consumed indices, ascending.
    pub used: Vec<u64>,
}

/// `BLOS | version | params JSON (u32 length) | form u8 | issued u64 |
/// code sha256 | master sha256 | |V| u64 | V u64...`.
pub fn encode_state(state: &StateFile) -> Vec<u8> {
    let params = serde_json::to_vec(&state.params).expect("params serialise");
    let mut out = Vec::new();
    header(&mut out, STATE_MAGIC);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    out.extend_from_slice(&params);
    out.push(match state.form {
        ControlForm::Explicit => TAG_EXPLICIT,
        ControlForm::Seeded => TAG_SEEDED,
    });
    out.extend_from_slice(&state.issued.to_le_bytes());
    out.extend_from_slice(&state.code_digest);
    out.extend_from_slice(&state.master_digest);
    out.extend_from_slice(&(state.used.len() as u64).to_le_bytes());
    for &i in &state.used {
        out.extend_from_slice(&i.to_le_bytes());
    }
    out
}

pub fn decode_state(bytes: &[u8]) -> Result<StateFile> {
    let mut r = Reader::new(bytes);
    r.header(STATE_MAGIC)?;
    let len = r.u32()? as usize;
    let params: SchemeParams = serde_json::from_slice(r.take(len)?)
        .map_err(|e| FormatError::Invalid(format!("parameters: {e}")))?;
    let form = match r.u8()? {
        TAG_EXPLICIT => ControlForm::Explicit,
        TAG_SEEDED => ControlForm::Seeded,
        other => return Err(FormatError::Invalid(format!("unknown control form tag {other}"))),
    };
    let issued = r.u64()?;
    let code_digest = r.array()?;
    let master_digest = r.array()?;
    let count = r.count(8)?;
    let used = (0..count).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    if used.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FormatError::Invalid("used indices must be strictly increasing".into()));
    }
    Ok(StateFile {
        params,
        form,
        issued,
        code_digest,
        master_digest,
        used,
    })
}
