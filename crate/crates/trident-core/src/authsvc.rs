//! Registration of the three credential associations and the three-stage
//! gatekeeper verification state machine.
//!
//! Registration derives, for one account: the LN converter and a committed
//! LN identifier; the LP converter, its committed LP identifier, and the
//! authentication password; and the device-only AP identity with the AP
//! committed as its identifier. Login walks `AwaitLN -> AwaitLP -> AwaitAP
//! -> Granted`, any stage may drop to the terminal `Rejected`, and nothing
//! leaves `Granted` or `Rejected`.
//!
//! Lookups key on the full combined identity (credential plus device), so
//! an unknown account and a failed identifier check are indistinguishable
//! to the caller; both read as a mismatch.

use std::fmt;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::converter::{assemble_ap, build_matrix, generate_ap};
use crate::error::{Error, Result};
use crate::identity::{
    combine_identity, commit_identifier, draw_selection, render_identifier, verify_commitment,
    DeviceProfile, IdentifierCommitment, IdentityDigest, IdentityKind, SelectionDescriptor,
};
use crate::keystream::{ConverterKind, MasterKey, MAX_ATTEMPTS};
use crate::policy::{field_accepts, normalize_login_name, validate_login_password, FieldKind};
use crate::store::Store;

/// Sessions expire after this much idle time unless configured otherwise.
pub const DEFAULT_IDLE_LIMIT: Duration = Duration::from_secs(300);

/// Everything the server stores for one account. No plaintext credential,
/// identifier, or AP appears here, only digests, commitments, and the
/// coordinates needed to re-derive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountRecord {
    #[serde(with = "crate::hexbytes")]
    pub account_id: [u8; 16],
    #[serde(with = "crate::hexbytes")]
    pub nonce: [u8; 16],
    pub ln_identity: IdentityDigest,
    pub ln_descriptor: SelectionDescriptor,
    pub ln_commitment: IdentifierCommitment,
    pub ln_attempt: u32,
    pub lp_identity: IdentityDigest,
    pub lp_descriptor: SelectionDescriptor,
    pub lp_commitment: IdentifierCommitment,
    pub lp_attempt: u32,
    pub ap_identity: IdentityDigest,
    pub ap_commitment: IdentifierCommitment,
}

/// Where a session stands. `Granted` and `Rejected` are terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    AwaitLn,
    AwaitLp,
    AwaitAp,
    Granted,
    Rejected,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::AwaitLn => "AwaitLN",
            Stage::AwaitLp => "AwaitLP",
            Stage::AwaitAp => "AwaitAP",
            Stage::Granted => "Granted",
            Stage::Rejected => "Rejected",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    LnMismatch,
    LpMismatch,
    ApMismatch,
    FieldRejected,
    OrderViolation,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::LnMismatch => "LN_MISMATCH",
            RejectReason::LpMismatch => "LP_MISMATCH",
            RejectReason::ApMismatch => "AP_MISMATCH",
            RejectReason::FieldRejected => "FIELD_REJECTED",
            RejectReason::OrderViolation => "ORDER_VIOLATION",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Advance,
    Reject,
}

/// What one stage submission did to the session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageResult {
    pub outcome: Outcome,
    pub new_stage: Stage,
}

/// One login attempt from one device.
#[derive(Debug)]
pub struct Session {
    session_id: [u8; 16],
    device: DeviceProfile,
    stage: Stage,
    account_id: Option<[u8; 16]>,
    reject_reason: Option<RejectReason>,
    // The login password is needed again at the AP stage to regenerate the
    // AP; it lives only here, never in the store.
    pending_password: Option<String>,
    last_activity: Instant,
    idle_limit: Duration,
}

/// Registers an account: normalizes and validates the credentials, derives
/// all three associations, and persists the record.
pub fn register_account<R: Rng + ?Sized>(
    key: &MasterKey,
    rng: &mut R,
    store: &mut Store,
    device: &DeviceProfile,
    raw_login_name: &str,
    login_password: &str,
) -> Result<AccountRecord> {
    let login_name = normalize_login_name(raw_login_name)?;
    validate_login_password(login_password)?;

    let ln_identity = combine_identity(IdentityKind::Ln, Some(&login_name), device)?;
    if store.get_by_ln_digest(&ln_identity.digest).is_some() {
        return Err(Error::DuplicateIdentity);
    }

    let mut account_id = [0u8; 16];
    rng.fill_bytes(&mut account_id);
    let mut nonce = [0u8; 16];
    rng.fill_bytes(&mut nonce);

    // LN association. The attempt advances only if selection exhausts on a
    // pathological matrix; attempt 0 succeeds in practice.
    let mut ln = None;
    for attempt in 0..MAX_ATTEMPTS {
        let matrix = build_matrix(
            key,
            &nonce,
            ConverterKind::Ln,
            &login_name,
            device.imei(),
            device.imsi(),
            attempt,
        )?;
        match draw_selection(rng, &matrix) {
            Ok(descriptor) => {
                ln = Some((matrix, descriptor));
                break;
            }
            Err(Error::SelectionExhausted) => continue,
            Err(e) => return Err(e),
        }
    }
    let (ln_matrix, ln_descriptor) = ln.ok_or(Error::DerivationExhausted)?;
    let ln_identifier = render_identifier(&ln_matrix, &ln_descriptor)?;
    let ln_commitment = commit_identifier(rng, &ln_identifier);

    // LP association. The AP policy loop fixes the LP attempt; LP matrix
    // and AP share that one derivation.
    let (lp_matrix, ap) = generate_ap(key, &nonce, login_password, device.imei(), device.imsi())?;
    let lp_descriptor = draw_selection(rng, &lp_matrix)?;
    let lp_identifier = render_identifier(&lp_matrix, &lp_descriptor)?;
    let lp_commitment = commit_identifier(rng, &lp_identifier);
    let lp_identity = combine_identity(IdentityKind::Lp, Some(login_password), device)?;

    // AP association: device-only identity, the AP itself as identifier.
    let ap_identity = combine_identity(IdentityKind::Ap, None, device)?;
    let ap_commitment = commit_identifier(rng, ap.as_str());

    let record = AccountRecord {
        account_id,
        nonce,
        ln_identity,
        ln_descriptor,
        ln_commitment,
        ln_attempt: ln_matrix.attempt,
        lp_identity,
        lp_descriptor,
        lp_commitment,
        lp_attempt: lp_matrix.attempt,
        ap_identity,
        ap_commitment,
    };
    store.put_account(record.clone())?;
    Ok(record)
}

impl Session {
    /// Fresh session at `AwaitLN` with the default idle limit.
    pub fn begin<R: Rng + ?Sized>(rng: &mut R, device: DeviceProfile) -> Session {
        Session::begin_with_idle_limit(rng, device, DEFAULT_IDLE_LIMIT)
    }

    pub fn begin_with_idle_limit<R: Rng + ?Sized>(
        rng: &mut R,
        device: DeviceProfile,
        idle_limit: Duration,
    ) -> Session {
        let mut session_id = [0u8; 16];
        rng.fill_bytes(&mut session_id);
        Session {
            session_id,
            device,
            stage: Stage::AwaitLn,
            account_id: None,
            reject_reason: None,
            pending_password: None,
            last_activity: Instant::now(),
            idle_limit,
        }
    }

    pub fn session_id(&self) -> &[u8; 16] {
        &self.session_id
    }

    pub fn device(&self) -> &DeviceProfile {
        &self.device
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn account_id(&self) -> Option<&[u8; 16]> {
        self.account_id.as_ref()
    }

    pub fn reject_reason(&self) -> Option<RejectReason> {
        self.reject_reason
    }

    /// Stage-entry gate. Terminal sessions are left untouched; expired or
    /// out-of-order submissions reject the session.
    fn gate(&mut self, expected: Stage) -> Option<StageResult> {
        if matches!(self.stage, Stage::Granted | Stage::Rejected) {
            return Some(StageResult {
                outcome: Outcome::Reject,
                new_stage: self.stage,
            });
        }
        if self.stage != expected || self.last_activity.elapsed() > self.idle_limit {
            return Some(self.reject(RejectReason::OrderViolation));
        }
        self.last_activity = Instant::now();
        None
    }

    fn reject(&mut self, reason: RejectReason) -> StageResult {
        self.stage = Stage::Rejected;
        self.reject_reason = Some(reason);
        self.pending_password = None;
        StageResult {
            outcome: Outcome::Reject,
            new_stage: Stage::Rejected,
        }
    }

    fn advance(&mut self, next: Stage) -> StageResult {
        self.stage = next;
        StageResult {
            outcome: Outcome::Advance,
            new_stage: next,
        }
    }

    /// LN stage: field gate, then identity lookup, then identifier check
    /// against the regenerated LN converter.
    pub fn submit_login_name(&mut self, key: &MasterKey, store: &Store, input: &str) -> StageResult {
        if let Some(result) = self.gate(Stage::AwaitLn) {
            return result;
        }
        if !field_accepts(FieldKind::LnField, input) {
            return self.reject(RejectReason::FieldRejected);
        }
        // Too-short input cannot belong to any account; same outcome as an
        // unknown identity so nothing about the store leaks.
        let Ok(login_name) = normalize_login_name(input) else {
            return self.reject(RejectReason::LnMismatch);
        };
        let Ok(identity) = combine_identity(IdentityKind::Ln, Some(&login_name), &self.device) else {
            return self.reject(RejectReason::LnMismatch);
        };
        let Some(record) = store.get_by_ln_digest(&identity.digest) else {
            return self.reject(RejectReason::LnMismatch);
        };
        let verified = build_matrix(
            key,
            &record.nonce,
            ConverterKind::Ln,
            &login_name,
            self.device.imei(),
            self.device.imsi(),
            record.ln_attempt,
        )
        .and_then(|m| render_identifier(&m, &record.ln_descriptor))
        .map(|id| verify_commitment(&id, &record.ln_commitment))
        .unwrap_or(false);
        if !verified {
            return self.reject(RejectReason::LnMismatch);
        }
        self.account_id = Some(record.account_id);
        self.advance(Stage::AwaitLp)
    }

    /// LP stage: field gate, identity must match the account from the LN
    /// stage, then identifier check against the regenerated LP converter.
    pub fn submit_login_password(
        &mut self,
        key: &MasterKey,
        store: &Store,
        input: &str,
    ) -> StageResult {
        if let Some(result) = self.gate(Stage::AwaitLp) {
            return result;
        }
        if !field_accepts(FieldKind::LpField, input) {
            return self.reject(RejectReason::FieldRejected);
        }
        let Some(account_id) = self.account_id else {
            return self.reject(RejectReason::OrderViolation);
        };
        let Some(record) = store.get_by_account_id(&account_id) else {
            return self.reject(RejectReason::LpMismatch);
        };
        let Ok(identity) = combine_identity(IdentityKind::Lp, Some(input), &self.device) else {
            return self.reject(RejectReason::LpMismatch);
        };
        if identity.digest != record.lp_identity.digest {
            return self.reject(RejectReason::LpMismatch);
        }
        let verified = build_matrix(
            key,
            &record.nonce,
            ConverterKind::Lp,
            input,
            self.device.imei(),
            self.device.imsi(),
            record.lp_attempt,
        )
        .and_then(|m| render_identifier(&m, &record.lp_descriptor))
        .map(|id| verify_commitment(&id, &record.lp_commitment))
        .unwrap_or(false);
        if !verified {
            return self.reject(RejectReason::LpMismatch);
        }
        self.pending_password = Some(input.to_string());
        self.advance(Stage::AwaitAp)
    }

    /// AP stage: regenerate the AP from the session's login password and
    /// the stored (nonce, lp_attempt), then verify the device-only AP
    /// identity and the AP commitment.
    pub fn finalize(&mut self, key: &MasterKey, store: &Store) -> StageResult {
        if let Some(result) = self.gate(Stage::AwaitAp) {
            return result;
        }
        let Some(account_id) = self.account_id else {
            return self.reject(RejectReason::OrderViolation);
        };
        let Some(password) = self.pending_password.take() else {
            return self.reject(RejectReason::OrderViolation);
        };
        let Some(record) = store.get_by_account_id(&account_id) else {
            return self.reject(RejectReason::ApMismatch);
        };
        let regenerated = match build_matrix(
            key,
            &record.nonce,
            ConverterKind::Lp,
            &password,
            self.device.imei(),
            self.device.imsi(),
            record.lp_attempt,
        ) {
            Ok(matrix) => assemble_ap(&matrix),
            Err(_) => return self.reject(RejectReason::ApMismatch),
        };
        let device_matches = combine_identity(IdentityKind::Ap, None, &self.device)
            .map(|identity| identity.digest == record.ap_identity.digest)
            .unwrap_or(false);
        if device_matches && verify_commitment(&regenerated, &record.ap_commitment) {
            self.advance(Stage::Granted)
        } else {
            self.reject(RejectReason::ApMismatch)
        }
    }
}
