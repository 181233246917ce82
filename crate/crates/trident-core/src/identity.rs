//! Identities, identifier selection, and salted identifier commitments.
//!
//! An *identity* is what the user brings: a credential (or nothing, for the
//! AP) combined with the device's IMEI and IMSI, hashed into a fixed
//! digest. An *identifier* is what the system makes: text read out of
//! converter cells, chosen freshly at registration and stored only as a
//! salted SHA-256 commitment plus the selection coordinates needed to
//! re-derive it. Verification regenerates the converter, replays the stored
//! selection, and checks the commitment.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;

use crate::converter::QuasiMatrix;
use crate::error::{Error, Result};
use crate::keystream::{push_field, ConverterKind};

/// Selection retries before giving up on a pathological matrix.
const MAX_SELECTION_RETRIES: u32 = 64;

/// Minimum rendered identifier length accepted by [`draw_selection`].
/// Degenerate selections (three single-character cells, a one-character
/// row) carry so little entropy that cross-account text collisions show up
/// at a few hundred accounts; the length floor keeps identifiers in the
/// regime the scheme treats as secret.
const MIN_IDENTIFIER_CHARS: usize = 8;

/// Simulated smartphone: 15-digit IMEI and IMSI plus a phone number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DeviceProfileWire", into = "DeviceProfileWire")]
pub struct DeviceProfile {
    imei: String,
    imsi: String,
    phone_number: String,
}

impl DeviceProfile {
    pub fn new(imei: impl Into<String>, imsi: impl Into<String>, phone_number: impl Into<String>) -> Result<Self> {
        let imei = imei.into();
        let imsi = imsi.into();
        let fifteen_digits = |s: &str| s.len() == 15 && s.bytes().all(|b| b.is_ascii_digit());
        if !fifteen_digits(&imei) {
            return Err(Error::InvalidDevice("IMEI must be exactly 15 digits".into()));
        }
        if !fifteen_digits(&imsi) {
            return Err(Error::InvalidDevice("IMSI must be exactly 15 digits".into()));
        }
        Ok(DeviceProfile {
            imei,
            imsi,
            phone_number: phone_number.into(),
        })
    }

    pub fn imei(&self) -> &str {
        &self.imei
    }

    pub fn imsi(&self) -> &str {
        &self.imsi
    }

    pub fn phone_number(&self) -> &str {
        &self.phone_number
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceProfileWire {
    imei: String,
    imsi: String,
    phone_number: String,
}

impl TryFrom<DeviceProfileWire> for DeviceProfile {
    type Error = Error;

    fn try_from(w: DeviceProfileWire) -> Result<Self> {
        DeviceProfile::new(w.imei, w.imsi, w.phone_number)
    }
}

impl From<DeviceProfile> for DeviceProfileWire {
    fn from(d: DeviceProfile) -> Self {
        DeviceProfileWire {
            imei: d.imei,
            imsi: d.imsi,
            phone_number: d.phone_number,
        }
    }
}

/// Which of the three identities a digest represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IdentityKind {
    #[serde(rename = "LN")]
    Ln,
    #[serde(rename = "LP")]
    Lp,
    #[serde(rename = "AP")]
    Ap,
}

impl IdentityKind {
    fn tag(self) -> &'static [u8] {
        match self {
            IdentityKind::Ln => b"LN",
            IdentityKind::Lp => b"LP",
            IdentityKind::Ap => b"AP",
        }
    }
}

impl fmt::Display for IdentityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdentityKind::Ln => "LN",
            IdentityKind::Lp => "LP",
            IdentityKind::Ap => "AP",
        })
    }
}

impl From<ConverterKind> for IdentityKind {
    fn from(k: ConverterKind) -> Self {
        match k {
            ConverterKind::Ln => IdentityKind::Ln,
            ConverterKind::Lp => IdentityKind::Lp,
        }
    }
}

/// SHA-256 over the length-prefixed combination of kind tag, credential
/// (empty for AP), IMEI, and IMSI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityDigest {
    pub kind: IdentityKind,
    #[serde(with = "crate::hexbytes")]
    pub digest: [u8; 32],
}

/// The four converter columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CellColumn {
    Char,
    Digit,
    String,
    Label,
}

impl fmt::Display for CellColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellColumn::Char => "CHAR",
            CellColumn::Digit => "DIGIT",
            CellColumn::String => "STRING",
            CellColumn::Label => "LABEL",
        })
    }
}

/// One matrix cell, row 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellCoord {
    pub row: usize,
    pub col: CellColumn,
}

/// How an identifier is read out of a matrix. Stored per account so
/// verification replays the exact selection.
///
/// Shape rules (checked by [`SelectionDescriptor::validate`], enforced on
/// store load): a column selection never uses the CHAR column, and a cell
/// combination holds 3-6 distinct coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", deny_unknown_fields)]
pub enum SelectionDescriptor {
    #[serde(rename = "ROW")]
    Row { row_index: usize },
    #[serde(rename = "COLUMN")]
    Column { column: CellColumn },
    #[serde(rename = "CELLS")]
    Cells { cells: Vec<CellCoord> },
}

impl SelectionDescriptor {
    /// Shape check, independent of any matrix.
    pub fn validate(&self) -> std::result::Result<(), String> {
        match self {
            SelectionDescriptor::Row { row_index } => {
                if *row_index == 0 {
                    return Err("row_index is 1-based".into());
                }
            }
            SelectionDescriptor::Column { column } => {
                if *column == CellColumn::Char {
                    return Err("column selection must not use the CHAR column".into());
                }
            }
            SelectionDescriptor::Cells { cells } => {
                if !(3..=6).contains(&cells.len()) {
                    return Err(format!("cell selection needs 3-6 cells, got {}", cells.len()));
                }
                for (i, c) in cells.iter().enumerate() {
                    if cells[..i].contains(c) {
                        return Err(format!("duplicate cell (row {}, {})", c.row, c.col));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Salted commitment to an identifier: `SHA-256(salt || identifier)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifierCommitment {
    #[serde(with = "crate::hexbytes")]
    pub salt: [u8; 16],
    #[serde(with = "crate::hexbytes")]
    pub commitment: [u8; 32],
}

/// Hashes a user identity. LN and LP identities require the credential;
/// the AP identity is device-only.
pub fn combine_identity(
    kind: IdentityKind,
    credential: Option<&str>,
    device: &DeviceProfile,
) -> Result<IdentityDigest> {
    match (kind, credential) {
        (IdentityKind::Ln | IdentityKind::Lp, Some(_)) | (IdentityKind::Ap, None) => {}
        _ => return Err(Error::IdentityShape { kind }),
    }
    let mut encoded = Vec::new();
    push_field(&mut encoded, kind.tag());
    push_field(&mut encoded, credential.unwrap_or("").as_bytes());
    push_field(&mut encoded, device.imei.as_bytes());
    push_field(&mut encoded, device.imsi.as_bytes());
    let digest: [u8; 32] = Sha256::digest(&encoded).into();
    Ok(IdentityDigest { kind, digest })
}

/// Reads one cell as text. LABEL renders like `17R`; requesting the label
/// of an unlabeled row is out of range.
pub fn render_cell(m: &QuasiMatrix, c: &CellCoord) -> Result<String> {
    let row = c
        .row
        .checked_sub(1)
        .and_then(|i| m.rows.get(i))
        .ok_or(Error::CellOutOfRange { row: c.row, col: c.col })?;
    match c.col {
        CellColumn::Char => Ok(row.input_char.to_string()),
        CellColumn::Digit => Ok(row.digit.to_string()),
        CellColumn::String => Ok(row.converted.clone()),
        CellColumn::Label => row
            .label
            .map(|l| l.to_string())
            .ok_or(Error::CellOutOfRange { row: c.row, col: c.col }),
    }
}

/// Concatenates the selected cells into identifier text.
///
/// ROW joins char, digit, string, and label of one row (an absent label
/// contributes nothing); COLUMN joins one column top to bottom on the same
/// terms; CELLS joins the listed cells in order.
pub fn render_identifier(m: &QuasiMatrix, d: &SelectionDescriptor) -> Result<String> {
    match d {
        SelectionDescriptor::Row { row_index } => {
            let row = row_index
                .checked_sub(1)
                .and_then(|i| m.rows.get(i))
                .ok_or(Error::CellOutOfRange { row: *row_index, col: CellColumn::Char })?;
            let mut out = String::new();
            out.push(row.input_char);
            out.push_str(&row.digit.to_string());
            out.push_str(&row.converted);
            if let Some(label) = row.label {
                out.push_str(&label.to_string());
            }
            Ok(out)
        }
        SelectionDescriptor::Column { column } => {
            let mut out = String::new();
            for row in &m.rows {
                match column {
                    CellColumn::Char => out.push(row.input_char),
                    CellColumn::Digit => out.push_str(&row.digit.to_string()),
                    CellColumn::String => out.push_str(&row.converted),
                    CellColumn::Label => {
                        if let Some(label) = row.label {
                            out.push_str(&label.to_string());
                        }
                    }
                }
            }
            Ok(out)
        }
        SelectionDescriptor::Cells { cells } => {
            let mut out = String::new();
            for c in cells {
                out.push_str(&render_cell(m, c)?);
            }
            Ok(out)
        }
    }
}

fn acceptable_identifier(text: &str) -> bool {
    // Unusable as field input, and long enough to be worth keeping secret.
    text.chars().any(|c| !(c.is_ascii_lowercase() || c.is_ascii_digit()))
        && text.chars().count() >= MIN_IDENTIFIER_CHARS
}

/// Draws a fresh selection: mode uniform over row / column / cells, then
/// uniform contents, retried until the rendered identifier contains at
/// least one character the login fields reject and clears the length
/// floor.
pub fn draw_selection<R: Rng + ?Sized>(rng: &mut R, m: &QuasiMatrix) -> Result<SelectionDescriptor> {
    assert!(!m.rows.is_empty(), "draw_selection requires a non-empty matrix");
    let n = m.rows.len();
    let labeled: Vec<usize> = (1..=n).filter(|&r| m.rows[r - 1].label.is_some()).collect();
    let coord_space = 3 * n + labeled.len();

    for _ in 0..MAX_SELECTION_RETRIES {
        let descriptor = match rng.gen_range(0..3u8) {
            0 => SelectionDescriptor::Row { row_index: rng.gen_range(1..=n) },
            1 => {
                let column = match rng.gen_range(0..3u8) {
                    0 => CellColumn::Digit,
                    1 => CellColumn::String,
                    _ => CellColumn::Label,
                };
                SelectionDescriptor::Column { column }
            }
            _ => {
                let k = rng.gen_range(3..=6usize).min(coord_space);
                let mut cells: Vec<CellCoord> = Vec::with_capacity(k);
                while cells.len() < k {
                    let row = rng.gen_range(1..=n);
                    let col = match rng.gen_range(0..4u8) {
                        0 => CellColumn::Char,
                        1 => CellColumn::Digit,
                        2 => CellColumn::String,
                        _ => CellColumn::Label,
                    };
                    if col == CellColumn::Label && m.rows[row - 1].label.is_none() {
                        continue;
                    }
                    let coord = CellCoord { row, col };
                    if !cells.contains(&coord) {
                        cells.push(coord);
                    }
                }
                SelectionDescriptor::Cells { cells }
            }
        };
        let text = render_identifier(m, &descriptor).expect("drawn selections are in range");
        if acceptable_identifier(&text) {
            return Ok(descriptor);
        }
    }
    Err(Error::SelectionExhausted)
}

/// Commits to an identifier under a fresh 16-byte salt.
pub fn commit_identifier<R: Rng + ?Sized>(rng: &mut R, identifier: &str) -> IdentifierCommitment {
    debug_assert!(!identifier.is_empty());
    let mut salt = [0u8; 16];
    rng.fill_bytes(&mut salt);
    let mut hasher = Sha256::new();
    hasher.update(salt);
    hasher.update(identifier.as_bytes());
    IdentifierCommitment {
        salt,
        commitment: hasher.finalize().into(),
    }
}

/// Constant-time commitment check.
pub fn verify_commitment(identifier: &str, c: &IdentifierCommitment) -> bool {
    let mut hasher = Sha256::new();
    hasher.update(c.salt);
    hasher.update(identifier.as_bytes());
    let recomputed: [u8; 32] = hasher.finalize().into();
    recomputed.ct_eq(&c.commitment).into()
}
