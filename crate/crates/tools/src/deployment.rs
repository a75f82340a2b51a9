//! On-disk layout of a deployment directory.
//!
//! ```text
//! deployment.json     manifest: parameters, digests, user blob files
//! state.bin           operator bookkeeping (issued rounds, used entries)
//! code.bin            tracing code
//! master.bin          master blob
//! users/user-N.blob   personal blobs
//! transcript.jsonl    broadcast log written by `run`
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use blob_core::bits::IndexSet;
use blob_core::scheme::{Blob, OperatorState, SchemeParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::format::{self, StateFile, FORMAT_VERSION};

pub const MANIFEST: &str = "deployment.json";
pub const STATE: &str = "state.bin";
pub const CODE: &str = "code.bin";
pub const MASTER: &str = "master.bin";
pub const TRANSCRIPT: &str = "transcript.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserFile {
    pub user: u32,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u16,
    /// SHA-256 over the parameters and the code and master digests.
    pub deployment_id: String,
    pub params: SchemeParams,
    pub code_sha256: String,
    pub master_sha256: String,
    pub users: Vec<UserFile>,
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value).expect("serialisable");
    text.push(b'\n');
    write(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read(path)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn user_file(user: u32) -> String {
    format!("users/user-{user}.blob")
}

fn deployment_id(params: &SchemeParams, code_digest: &[u8], master_digest: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(params).expect("serialisable"));
    h.update(code_digest);
    h.update(master_digest);
    hex::encode(h.finalize())
}

fn digest(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

fn state_file(state: &OperatorState, code_digest: [u8; 32], master_digest: [u8; 32]) -> StateFile {
    StateFile {
        params: state.params().clone(),
        form: state.control_form(),
        issued: state.issued(),
        code_digest,
        master_digest,
        used: state.used().iter().collect(),
    }
}

/// Writes every file of a fresh deployment and returns its manifest.
pub fn save(dir: &Path, state: &OperatorState, blobs: &[Blob]) -> Result<Manifest> {
    let code = format::encode_code(state.code());
    let master = format::encode_blob(state.master());
    let (code_digest, master_digest) = (digest(&code), digest(&master));
    write(&dir.join(CODE), &code)?;
    write(&dir.join(MASTER), &master)?;
    write(
        &dir.join(STATE),
        &format::encode_state(&state_file(state, code_digest, master_digest)),
    )?;
    let mut users = Vec::with_capacity(blobs.len());
    for (u, blob) in blobs.iter().enumerate() {
        let bytes = format::encode_blob(blob);
        let file = user_file(u as u32);
        write(&dir.join(&file), &bytes)?;
        users.push(UserFile {
            user: u as u32,
            file,
            sha256: hex::encode(digest(&bytes)),
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        deployment_id: deployment_id(state.params(), &code_digest, &master_digest),
        params: state.params().clone(),
        code_sha256: hex::encode(code_digest),
        master_sha256: hex::encode(master_digest),
        users,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(CliError::Validation(format!(
            "{}: unsupported format version {}",
            dir.join(MANIFEST).display(),
            manifest.format_version
        )));
    }
    Ok(manifest)
}

fn check_digest(path: &Path, bytes: &[u8], expected: &str) -> Result<()> {
    let found = hex::encode(digest(bytes));
    if found != expected {
        return Err(CliError::Validation(format!(
            "{}: deployment hash mismatch (sha256 {found}, manifest says {expected})",
            path.display()
        )));
    }
    Ok(())
}

/// Loads the operator state, checking every file against the manifest.
pub fn load_operator(dir: &Path) -> Result<(OperatorState, Manifest)> {
    let manifest = load_manifest(dir)?;
    let (code_path, master_path, state_path) = (dir.join(CODE), dir.join(MASTER), dir.join(STATE));
    let code_bytes = read(&code_path)?;
    check_digest(&code_path, &code_bytes, &manifest.code_sha256)?;
    let master_bytes = read(&master_path)?;
    check_digest(&master_path, &master_bytes, &manifest.master_sha256)?;
    let stored = format::decode_state(&read(&state_path)?).map_err(|e| CliError::format(&state_path, e))?;
    if stored.params != manifest.params
        || hex::encode(stored.code_digest) != manifest.code_sha256
        || hex::encode(stored.master_digest) != manifest.master_sha256
    {
        return Err(CliError::Validation(format!(
            "{}: state belongs to a different deployment",
            state_path.display()
        )));
    }
    let code = format::decode_code(&code_bytes).map_err(|e| CliError::format(&code_path, e))?;
    let master = format::decode_blob(&master_bytes).map_err(|e| CliError::format(&master_path, e))?;
    let used = IndexSet::from_indices(stored.params.entry_count, stored.used.iter().copied());
    let mut state = OperatorState::from_parts(stored.params, code, master, used, stored.issued)?;
    state.set_control_form(stored.form);
    Ok((state, manifest))
}

pub fn save_state(dir: &Path, state: &OperatorState, manifest: &Manifest) -> Result<()> {
    let mut code_digest = [0u8; 32];
    let mut master_digest = [0u8; 32];
    hex::decode_to_slice(&manifest.code_sha256, &mut code_digest)
        .and_then(|_| hex::decode_to_slice(&manifest.master_sha256, &mut master_digest))
        .map_err(|e| CliError::Validation(format!("manifest digest: {e}")))?;
    write(
        &dir.join(STATE),
        &format::encode_state(&state_file(state, code_digest, master_digest)),
    )
}

/// Loads user `u`'s blob after checking it against the manifest.
pub fn load_user(dir: &Path, manifest: &Manifest, user: u32) -> Result<Blob> {
    let entry = manifest
        .users
        .iter()
        .find(|f| f.user == user)
        .ok_or_else(|| CliError::Validation(format!("user {user} is not in the deployment")))?;
    let path: PathBuf = dir.join(&entry.file);
    let bytes = read(&path)?;
    check_digest(&path, &bytes, &entry.sha256)?;
    let blob = format::decode_blob(&bytes).map_err(|e| CliError::format(&path, e))?;
    if blob.len() != manifest.params.entry_count || blob.width() != manifest.params.entry_width {
        return Err(CliError::Validation(format!(
            "{}: blob shape does not match the deployment",
            path.display()
        )));
    }
    Ok(blob)
}
