//! Quasi-matrix password converters and authentication-password assembly.
//!
//! A converter maps each credential character to a row: the character
//! itself, a digit in `[1,5]`, a converted string of exactly that many
//! printable characters, and (from the second row on) a shuffle label such
//! as `17R`. An LP converter's digits sum to exactly 20 so that shuffling
//! all row strings together fills a 20-slot buffer: the authentication
//! password.
//!
//! Shuffle rule: rows are processed in order. Row 1 anchors at slot 1 and
//! writes forward. Every later row starts at its label offset and steps +1
//! (`F`) or -1 (`R`), wrapping modulo 20 and skipping occupied slots. Since
//! the digits sum to 20, the buffer always ends full.

use std::fmt;

use crate::error::{Error, Result};
use crate::keystream::{new_stream, ConverterKind, MasterKey, Stream, StreamContext, MAX_ATTEMPTS};
use crate::policy;

/// Authentication passwords are exactly this long.
pub const AP_LEN: usize = 20;

/// The 94 printable ASCII characters (0x21-0x7E) converted strings draw from.
pub const PRINTABLE: [u8; 94] = {
    let mut t = [0u8; 94];
    let mut i = 0;
    while i < 94 {
        t[i] = 0x21 + i as u8;
        i += 1;
    }
    t
};

/// Shuffle step direction: `F` walks slots forward, `R` in reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

/// Per-row shuffle tag, rendered as offset then direction, e.g. `17R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShuffleLabel {
    /// Start slot in `[1, 20]`.
    pub offset: u8,
    pub direction: Direction,
}

impl fmt::Display for ShuffleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match self.direction {
            Direction::Forward => 'F',
            Direction::Reverse => 'R',
        };
        write!(f, "{}{}", self.offset, d)
    }
}

/// One converter row. `converted` always has exactly `digit` characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConverterRow {
    pub input_char: char,
    pub digit: u8,
    pub converted: String,
    pub label: Option<ShuffleLabel>,
}

/// A full converter: one row per credential character, in credential order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuasiMatrix {
    pub kind: ConverterKind,
    pub rows: Vec<ConverterRow>,
    /// The derivation counter that produced this matrix.
    pub attempt: u32,
}

impl QuasiMatrix {
    pub fn digit_sum(&self) -> u32 {
        self.rows.iter().map(|r| u32::from(r.digit)).sum()
    }
}

/// A 20-character string that passed the AP policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApString(String);

impl ApString {
    pub fn new(s: String) -> Option<ApString> {
        policy::check_ap_policy(&s).then_some(ApString(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ApString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Draws `n_rows` digits in `[1,5]`, optionally constrained to an exact sum.
///
/// Constrained sampling keeps every prefix completable: with `remaining`
/// sum and `m` rows still to draw, the digit is uniform in
/// `[max(1, remaining-5(m-1)), min(5, remaining-(m-1))]`.
pub fn derive_digits(s: &mut Stream, n_rows: usize, target_sum: Option<u32>) -> Result<Vec<u8>> {
    match target_sum {
        None => Ok((0..n_rows).map(|_| s.next_uint(1, 5) as u8).collect()),
        Some(target) => {
            if n_rows == 0 || target < n_rows as u32 || target > 5 * n_rows as u32 {
                return Err(Error::InfeasibleDigits { n_rows, target_sum: target });
            }
            let mut digits = Vec::with_capacity(n_rows);
            let mut remaining = target;
            for j in 0..n_rows {
                let m = (n_rows - j) as u32; // rows left, including this one
                let lo = 1.max(remaining.saturating_sub(5 * (m - 1)));
                let hi = 5.min(remaining - (m - 1));
                let d = s.next_uint(u64::from(lo), u64::from(hi)) as u8;
                remaining -= u32::from(d);
                digits.push(d);
            }
            debug_assert_eq!(remaining, 0);
            Ok(digits)
        }
    }
}

/// Converts one credential character into a row: `digit` printable
/// characters plus (beyond row 1) a label drawn as offset then direction.
pub fn derive_row(s: &mut Stream, c: char, digit: u8, is_first_row: bool) -> ConverterRow {
    debug_assert!((1..=5).contains(&digit));
    let converted: String = (0..digit).map(|_| s.next_char(&PRINTABLE)).collect();
    let label = if is_first_row {
        None
    } else {
        let offset = s.next_uint(1, 20) as u8;
        let direction = if s.next_uint(0, 1) == 0 {
            Direction::Forward
        } else {
            Direction::Reverse
        };
        Some(ShuffleLabel { offset, direction })
    };
    ConverterRow {
        input_char: c,
        digit,
        converted,
        label,
    }
}

/// Builds the converter for a credential. All randomness comes from a
/// single stream over `(nonce, kind, credential, imei, imsi, attempt)`;
/// the caller is expected to have validated the credential already.
#[allow(clippy::too_many_arguments)]
pub fn build_matrix(
    key: &MasterKey,
    nonce: &[u8; 16],
    kind: ConverterKind,
    credential: &str,
    imei: &str,
    imsi: &str,
    attempt: u32,
) -> Result<QuasiMatrix> {
    let mut stream = new_stream(
        key,
        &StreamContext {
            nonce,
            kind,
            credential,
            imei,
            imsi,
            attempt,
        },
    )?;
    let chars: Vec<char> = credential.chars().collect();
    let target = match kind {
        ConverterKind::Lp => Some(AP_LEN as u32),
        ConverterKind::Ln => None,
    };
    let digits = derive_digits(&mut stream, chars.len(), target)?;
    let rows = chars
        .iter()
        .zip(&digits)
        .enumerate()
        .map(|(i, (&c, &d))| derive_row(&mut stream, c, d, i == 0))
        .collect();
    Ok(QuasiMatrix {
        kind,
        rows,
        attempt,
    })
}

/// Shuffles an LP matrix's row strings into the 20-slot buffer and reads it
/// out. Pure permutation: the output is a rearrangement of the row strings'
/// characters, no more, no less.
pub fn assemble_ap(m: &QuasiMatrix) -> String {
    assert_eq!(m.kind, ConverterKind::Lp, "assemble_ap takes an LP matrix");
    assert_eq!(m.digit_sum() as usize, AP_LEN, "LP digit sum must be {AP_LEN}");

    let mut slots: [Option<char>; AP_LEN] = [None; AP_LEN];
    for (i, row) in m.rows.iter().enumerate() {
        // Slot positions are 1-based in labels; 0-based here.
        let (mut pos, step) = if i == 0 {
            (0usize, 1isize)
        } else {
            let label = row.label.expect("non-first LP rows carry labels");
            let step = match label.direction {
                Direction::Forward => 1isize,
                Direction::Reverse => -1isize,
            };
            (usize::from(label.offset) - 1, step)
        };
        let advance = |p: usize| -> usize {
            (p as isize + step).rem_euclid(AP_LEN as isize) as usize
        };
        for c in row.converted.chars() {
            while slots[pos].is_some() {
                pos = advance(pos);
            }
            slots[pos] = Some(c);
            pos = advance(pos);
        }
    }
    slots
        .iter()
        .map(|s| s.expect("digit sum 20 fills every slot"))
        .collect()
}

/// Derives the LP converter and its authentication password, bumping the
/// attempt counter until the assembled candidate passes the AP policy.
pub fn generate_ap(
    key: &MasterKey,
    nonce: &[u8; 16],
    credential: &str,
    imei: &str,
    imsi: &str,
) -> Result<(QuasiMatrix, ApString)> {
    for attempt in 0..MAX_ATTEMPTS {
        let matrix = build_matrix(key, nonce, ConverterKind::Lp, credential, imei, imsi, attempt)?;
        let candidate = assemble_ap(&matrix);
        if let Some(ap) = ApString::new(candidate) {
            return Ok((matrix, ap));
        }
    }
    Err(Error::DerivationExhausted)
}
