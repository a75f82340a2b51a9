use alloc::string::String;

use thiserror::Error;

/// Errors produced by the blob library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A parameter set violates one of its constraints.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// An exact computation would exceed the configured size cap.
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    /// Single-use key material has been used up.
    #[error("key material exhausted: {0}")]
    Exhausted(String),
    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: u64, len: u64 },
    /// Input arrays disagree in length or width.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A key-material entry needed for decryption is missing.
    #[error("entry {0} is erased")]
    Erased(u64),
    /// The authenticated cipher rejected the ciphertext.
    #[error("authentication failed")]
    Authentication,
    /// Blobs or states from different deployments were combined.
    #[error("deployment mismatch: {0}")]
    DeploymentMismatch(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! domain {
    ($($arg:tt)*) => {
        $crate::error::Error::Domain(alloc::format!($($arg)*))
    };
}
pub(crate) use domain;
