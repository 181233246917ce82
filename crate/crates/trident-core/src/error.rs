use thiserror::Error;

use crate::identity::{CellColumn, IdentityKind};
use crate::policy::PasswordViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The master key environment value is not 64 hex characters.
    #[error("invalid master key: {0}")]
    InvalidMasterKey(String),

    /// The per-account attempt counter ran out. With a working keystream
    /// this is statistically unreachable.
    #[error("derivation attempt counter exhausted")]
    DerivationExhausted,

    /// No digit vector of the requested length can hit the target sum.
    #[error("no {n_rows} digits in [1,5] can sum to {target_sum}")]
    InfeasibleDigits { n_rows: usize, target_sum: u32 },

    /// Login name did not normalize to 5-15 characters of [a-z0-9].
    #[error("login name normalizes to {normalized_len} characters, need 5-15")]
    InvalidLoginName { normalized_len: usize },

    #[error("invalid login password: {0}")]
    InvalidLoginPassword(PasswordViolation),

    /// Character classification is defined only over printable ASCII.
    #[error("unsupported character {0:?}: only printable ASCII is classified")]
    UnsupportedCharacter(char),

    /// A credential was supplied for an AP identity, or omitted for LN/LP.
    #[error("credential presence does not match identity kind {kind}")]
    IdentityShape { kind: IdentityKind },

    #[error("cell (row {row}, {col}) not present in matrix")]
    CellOutOfRange { row: usize, col: CellColumn },

    /// 64 selection retries failed to produce a field-rejected identifier;
    /// signals a pathological converter.
    #[error("selection retries exhausted")]
    SelectionExhausted,

    /// An account with the same LN identity digest is already registered.
    #[error("duplicate identity: account already registered")]
    DuplicateIdentity,

    /// IMEI or IMSI is not exactly 15 ASCII digits.
    #[error("invalid device profile: {0}")]
    InvalidDevice(String),

    #[error("corrupt store: {reason}")]
    CorruptStore { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
