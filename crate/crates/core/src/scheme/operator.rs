use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use super::blob::{derive_key, Blob, EntrySource, Owner};
use super::cipher::{Ciphertext, KeyedCipher, NONCE_LEN};
use super::control::{expand_seed, ControlForm, ControlMessage, IndexForm, MAX_SEED_RETRIES};
use super::params::{Mode, SchemeParams};
use crate::bits::{mask_to_width, IndexSet, PackedEntries};
use crate::error::{Error, Result};
use crate::rng;
use crate::tardos::{generate_code, TracingCode};

/// Everything the operator keeps secret or tracks across rounds.
#[derive(Debug, Clone)]
pub struct OperatorState {
    params: SchemeParams,
    code: TracingCode,
    master: Blob,
    tracing: IndexSet,
    used: IndexSet,
    issued: u64,
    form: ControlForm,
}

/// Builds a deployment: the operator state and one blob per user.
///
/// Functional entries are uniform and shared; user `u` holds
/// `alphabet[i][z_u,i]` at tracing position `i`. The master blob holds zero
/// at tracing positions.
pub fn initialise(params: &SchemeParams, seed: &[u8]) -> Result<(OperatorState, Vec<Blob>)> {
    params.validate()?;
    let code = generate_code(params, &rng::derive_seed(seed, "deployment/code", 0))?;
    let tracing = IndexSet::from_indices(params.entry_count, code.positions().iter().copied());

    let width = params.entry_width;
    let mut entries = PackedEntries::zeroed(width, params.entry_count);
    let mut fill = rng::chacha(seed, "deployment/functional", 0);
    for i in 0..params.entry_count {
        if !tracing.contains(i) {
            entries.set(i, random_entry(&mut fill, width));
        }
    }
    let master = Blob::new(Owner::Master, entries);

    let state = OperatorState {
        params: params.clone(),
        code,
        master,
        used: IndexSet::new(params.entry_count),
        tracing,
        issued: 0,
        form: ControlForm::Explicit,
    };
    let blobs = (0..params.users).map(|u| state.user_blob(u)).collect();
    Ok((state, blobs))
}

fn random_entry<R: RngCore + ?Sized>(rng: &mut R, width: u32) -> u128 {
    let v = if width > 64 {
        (rng.next_u64() as u128) | ((rng.next_u64() as u128) << 64)
    } else {
        rng.next_u64() as u128
    };
    mask_to_width(v, width)
}

impl OperatorState {
    /// Reassembles a state from stored parts, checking its invariants.
    pub fn from_parts(
        params: SchemeParams,
        code: TracingCode,
        master: Blob,
        used: IndexSet,
        issued: u64,
    ) -> Result<Self> {
        params.validate()?;
        if code.entry_count() != params.entry_count
            || code.entry_width() != params.entry_width
            || code.len() as u64 != params.tracing_count
            || code.users() != params.users
        {
            return Err(Error::DeploymentMismatch(
                "tracing code does not match the parameters".into(),
            ));
        }
        if master.len() != params.entry_count || master.width() != params.entry_width {
            return Err(Error::DeploymentMismatch(
                "master blob does not match the parameters".into(),
            ));
        }
        if used.universe() != params.entry_count {
            return Err(Error::Shape("used-index set has the wrong universe".into()));
        }
        let tracing = IndexSet::from_indices(params.entry_count, code.positions().iter().copied());
        if !used.is_disjoint(&tracing) {
            return Err(Error::InvalidParams(
                "used-index set intersects the tracing positions".into(),
            ));
        }
        let expected_used = match params.mode {
            Mode::SingleUse => issued * params.entries_per_key as u64,
            Mode::MultiUse => 0,
        };
        if used.len() != expected_used {
            return Err(Error::InvalidParams(format!(
                "used-index set has {} members, expected {expected_used}",
                used.len()
            )));
        }
        Ok(Self {
            params,
            code,
            master,
            tracing,
            used,
            issued,
            form: ControlForm::Explicit,
        })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn code(&self) -> &TracingCode {
        &self.code
    }

    /// Functional entries; tracing positions read as zero.
    pub fn master(&self) -> &Blob {
        &self.master
    }

    pub fn tracing_positions(&self) -> &IndexSet {
        &self.tracing
    }

    /// Consumed indices (single-use mode; always empty in multi-use mode).
    pub fn used(&self) -> &IndexSet {
        &self.used
    }

    /// Keys issued so far.
    pub fn issued(&self) -> u64 {
        self.issued
    }

    pub fn control_form(&self) -> ControlForm {
        self.form
    }

    pub fn set_control_form(&mut self, form: ControlForm) {
        self.form = form;
    }

    /// Entries still available for single-use keys.
    pub fn remaining(&self) -> u64 {
        match self.params.mode {
            Mode::SingleUse => self.params.functional_count() - self.used.len(),
            Mode::MultiUse => self.params.functional_count(),
        }
    }

    /// Reconstructs user `u`'s personal blob.
    pub fn user_blob(&self, user: u32) -> Blob {
        let mut blob = self.master.clone();
        blob.set_owner(Owner::User(user));
        let entries = blob.entries_mut();
        for (i, &index) in self.code.positions().iter().enumerate() {
            entries.set(index, self.code.user_value(user, i));
        }
        blob
    }

    /// Draws an index vector for the next round without changing state.
    ///
    /// Single-use: `ell` distinct indices outside tracing and used entries.
    /// Multi-use: `ell` independent uniform functional indices.
    pub fn draw_indices<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<u64>> {
        let ell = self.params.entries_per_key as u64;
        match self.params.mode {
            Mode::MultiUse => {
                let functional = self.params.functional_count();
                Ok((0..ell)
                    .map(|_| self.functional_index(rng.random_range(0..functional)))
                    .collect())
            }
            Mode::SingleUse => {
                let available = self.remaining();
                if available < ell {
                    return Err(self.exhausted(available));
                }
                let n = self.params.entry_count;
                if available.saturating_mul(8) >= n {
                    let mut picked = BTreeSet::new();
                    let mut out = Vec::with_capacity(ell as usize);
                    while out.len() < ell as usize {
                        let i = rng.random_range(0..n);
                        if !self.tracing.contains(i) && !self.used.contains(i) && picked.insert(i)
                        {
                            out.push(i);
                        }
                    }
                    Ok(out)
                } else {
                    let mut pool: Vec<u64> = (0..n)
                        .filter(|&i| !self.tracing.contains(i) && !self.used.contains(i))
                        .collect();
                    let (head, _) = pool.partial_shuffle(rng, ell as usize);
                    Ok(head.to_vec())
                }
            }
        }
    }

    /// The `rank`-th functional index in ascending order.
    fn functional_index(&self, rank: u64) -> u64 {
        // tracing positions before the answer: #{j : positions[j] - j <= rank}
        let positions = self.code.positions();
        let (mut lo, mut hi) = (0usize, positions.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if positions[mid] - mid as u64 <= rank {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        rank + lo as u64
    }

    fn exhausted(&self, available: u64) -> Error {
        Error::Exhausted(format!(
            "single-use blob has {available} unused functional entries, a key needs ell = {} (issued {} keys, n*ell <= N - t = {})",
            self.params.entries_per_key,
            self.issued,
            self.params.functional_count()
        ))
    }

    fn admissible(&self, indices: &[u64]) -> bool {
        if indices.iter().any(|&i| self.tracing.contains(i)) {
            return false;
        }
        match self.params.mode {
            Mode::MultiUse => true,
            Mode::SingleUse => {
                if indices.iter().any(|&i| self.used.contains(i)) {
                    return false;
                }
                let mut sorted = indices.to_vec();
                sorted.sort_unstable();
                sorted.windows(2).all(|w| w[0] != w[1])
            }
        }
    }

    /// Issues the control message for the next round and records the
    /// consumed entries (single-use mode).
    pub fn next_control_message(&mut self, seed: &[u8]) -> Result<ControlMessage> {
        let ell = self.params.entries_per_key;
        if self.params.mode == Mode::SingleUse && self.remaining() < ell as u64 {
            return Err(self.exhausted(self.remaining()));
        }
        let (form, indices) = match self.form {
            ControlForm::Explicit => {
                let mut rng = rng::chacha(seed, "control/explicit", self.issued);
                let indices = self.draw_indices(&mut rng)?;
                (IndexForm::Explicit(indices.clone()), indices)
            }
            ControlForm::Seeded => {
                let broadcast_seed = rng::derive_seed16(seed, "control/seed", self.issued);
                let mut found = None;
                for retry in 0..MAX_SEED_RETRIES {
                    let indices =
                        expand_seed(&broadcast_seed, retry, self.params.entry_count, ell as usize);
                    if self.admissible(&indices) {
                        found = Some((retry, indices));
                        break;
                    }
                }
                let (retry, indices) = found.ok_or_else(|| {
                    Error::Exhausted(format!(
                        "no admissible seed expansion within {MAX_SEED_RETRIES} retries"
                    ))
                })?;
                (
                    IndexForm::Seeded {
                        seed: broadcast_seed,
                        retry,
                    },
                    indices,
                )
            }
        };
        if self.params.mode == Mode::SingleUse {
            for &i in &indices {
                self.used.insert(i);
            }
        }
        let msg = ControlMessage {
            sequence: self.issued,
            form,
        };
        self.issued += 1;
        Ok(msg)
    }

    /// Runs one round: issues a control message and encrypts `plaintext`
    /// under the key it describes.
    pub fn encrypt<C: KeyedCipher + ?Sized>(
        &mut self,
        cipher: &C,
        plaintext: &[u8],
        seed: &[u8],
    ) -> Result<Ciphertext> {
        check_cipher(&self.params, cipher)?;
        let round = self.issued;
        let control = self.next_control_message(seed)?;
        let indices = control.indices(self.params.entry_count, self.params.entries_per_key)?;
        let key = derive_key(&self.master, &indices)?;
        let mut nonce = [0u8; NONCE_LEN];
        rng::chacha(seed, "encrypt/nonce", round).fill_bytes(&mut nonce);
        let payload = cipher.seal(key.as_bytes(), &nonce, plaintext)?;
        Ok(Ciphertext {
            nonce,
            payload,
            control,
        })
    }
}

fn check_cipher<C: KeyedCipher + ?Sized>(params: &SchemeParams, cipher: &C) -> Result<()> {
    if params.key_bits != cipher.key_bits() {
        return Err(Error::InvalidParams(format!(
            "key size k = {} must equal the cipher key size {}",
            params.key_bits,
            cipher.key_bits()
        )));
    }
    Ok(())
}

/// User-side decryption: gathers the key from `source` and opens the
/// payload. Fails with [`Error::Erased`] if an addressed entry is missing
/// and [`Error::Authentication`] if the key or payload is wrong.
pub fn decrypt<S: EntrySource + ?Sized, C: KeyedCipher + ?Sized>(
    params: &SchemeParams,
    source: &S,
    ciphertext: &Ciphertext,
    cipher: &C,
) -> Result<Vec<u8>> {
    check_cipher(params, cipher)?;
    if source.entry_count() != params.entry_count || source.entry_width() != params.entry_width {
        return Err(Error::Shape(format!(
            "blob of {} x {}-bit entries does not match N = {}, w = {}",
            source.entry_count(),
            source.entry_width(),
            params.entry_count,
            params.entry_width
        )));
    }
    let indices = ciphertext
        .control
        .indices(params.entry_count, params.entries_per_key)?;
    let key = derive_key(source, &indices)?;
    cipher.open(key.as_bytes(), &ciphertext.nonce, &ciphertext.payload)
}
