//! Triple-identity authentication over a dual-password login scheme.
//!
//! A user types two credentials: a login name and a login password, both
//! restricted to 5-15 characters of `[a-z0-9]`. The system never stores or
//! compares them directly. Instead each credential is expanded into a
//! *quasi-matrix converter* with one row per credential character, holding
//! a digit in `[1,5]`, a converted string of that many printable
//! characters, and a shuffle label. The login-password converter
//! additionally yields a 20-character *authentication password* (AP) by
//! shuffling its row strings into a slot buffer under the labels'
//! offset/direction rules.
//!
//! From each converter the system selects cells (a row, a column, or a
//! combination of cells) to form an *identifier*, stored only as a salted
//! SHA-256 commitment. The lookup key is the user's *identity*: credential
//! plus the device's IMEI and IMSI, hashed. Login runs a three-stage
//! gatekeeper: the login-name field, the login-password field, and a final
//! server-side AP check, each verifying one identity against its stored
//! identifier before the next stage opens.
//!
//! All converter randomness is a keyed deterministic function of
//! `(master key, account nonce, kind, credential, IMEI, IMSI, attempt)`, so
//! verification regenerates a byte-identical converter instead of reading
//! secrets from disk. Identifiers always contain at least one character
//! outside `[a-z0-9]`, which is exactly the set the login fields accept,
//! so replaying a captured identifier or AP into a field is rejected
//! before any lookup happens.
//!
//! Module map:
//! - [`keystream`]: HMAC-SHA-256 counter-mode stream; all derived randomness
//! - [`converter`]: quasi-matrix construction and AP assembly
//! - [`policy`]: credential rules, character classes, field gatekeeping
//! - [`identity`]: identity digests, cell selection, salted commitments
//! - [`store`]: file-backed account records with atomic replace
//! - [`authsvc`]: registration and the three-stage session state machine

pub mod authsvc;
pub mod converter;
mod error;
mod hexbytes;
pub mod identity;
pub mod keystream;
pub mod policy;
pub mod store;

pub use authsvc::{
    register_account, AccountRecord, Outcome, RejectReason, Session, Stage, StageResult,
};
pub use converter::{
    assemble_ap, build_matrix, derive_digits, derive_row, generate_ap, ApString, ConverterRow,
    Direction, QuasiMatrix, ShuffleLabel, AP_LEN,
};
pub use error::{Error, Result};
pub use identity::{
    combine_identity, commit_identifier, draw_selection, render_cell, render_identifier,
    verify_commitment, CellColumn, CellCoord, DeviceProfile, IdentifierCommitment, IdentityDigest,
    IdentityKind, SelectionDescriptor,
};
pub use keystream::{new_stream, ConverterKind, MasterKey, Stream, StreamContext};
pub use policy::{
    check_ap_policy, classify, field_accepts, normalize_login_name, validate_login_password,
    CharClassProfile, FieldKind, PasswordViolation,
};
pub use store::Store;
