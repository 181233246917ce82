//! Credential composition rules and login-field gatekeeping.
//!
//! Login names and login passwords are 5-15 characters of `[a-z0-9]`. The
//! authentication password is the opposite extreme: 20 characters, all four
//! character classes present, and an uppercase letter or symbol within the
//! first four. The login fields accept only `[a-z0-9]`, which makes every
//! identifier and every AP unusable as field input.

use std::fmt;

use crate::error::{Error, Result};

/// Login name and login password length bounds.
pub const CREDENTIAL_MIN: usize = 5;
pub const CREDENTIAL_MAX: usize = 15;

/// The two user-facing entry points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    LnField,
    LpField,
}

/// Which of the four character classes a string contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharClassProfile {
    pub has_upper: bool,
    pub has_lower: bool,
    pub has_digit: bool,
    pub has_symbol: bool,
}

impl CharClassProfile {
    pub fn class_count(&self) -> u8 {
        u8::from(self.has_upper)
            + u8::from(self.has_lower)
            + u8::from(self.has_digit)
            + u8::from(self.has_symbol)
    }
}

/// Why a login password was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PasswordViolation {
    Length,
    Charset,
}

impl fmt::Display for PasswordViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PasswordViolation::Length => write!(f, "length must be {CREDENTIAL_MIN}-{CREDENTIAL_MAX} characters"),
            PasswordViolation::Charset => f.write_str("only lowercase letters and digits are allowed"),
        }
    }
}

fn is_credential_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit()
}

/// Lowercases ASCII uppercase, drops everything outside `[a-z0-9]`, then
/// requires the result to be 5-15 characters.
pub fn normalize_login_name(raw: &str) -> Result<String> {
    let normalized: String = raw
        .chars()
        .filter_map(|c| {
            if c.is_ascii_uppercase() {
                Some(c.to_ascii_lowercase())
            } else if is_credential_char(c) {
                Some(c)
            } else {
                None
            }
        })
        .collect();
    if !(CREDENTIAL_MIN..=CREDENTIAL_MAX).contains(&normalized.len()) {
        return Err(Error::InvalidLoginName {
            normalized_len: normalized.len(),
        });
    }
    Ok(normalized)
}

/// Login passwords are taken as typed: no normalization, strict charset.
pub fn validate_login_password(pw: &str) -> Result<()> {
    if !(CREDENTIAL_MIN..=CREDENTIAL_MAX).contains(&pw.chars().count()) {
        return Err(Error::InvalidLoginPassword(PasswordViolation::Length));
    }
    if !pw.chars().all(is_credential_char) {
        return Err(Error::InvalidLoginPassword(PasswordViolation::Charset));
    }
    Ok(())
}

/// Classifies printable ASCII into upper/lower/digit/symbol flags.
/// Symbols are the 32 printable characters that are not alphanumeric.
pub fn classify(text: &str) -> Result<CharClassProfile> {
    let mut profile = CharClassProfile {
        has_upper: false,
        has_lower: false,
        has_digit: false,
        has_symbol: false,
    };
    for c in text.chars() {
        if !('\x21'..='\x7e').contains(&c) {
            return Err(Error::UnsupportedCharacter(c));
        }
        if c.is_ascii_uppercase() {
            profile.has_upper = true;
        } else if c.is_ascii_lowercase() {
            profile.has_lower = true;
        } else if c.is_ascii_digit() {
            profile.has_digit = true;
        } else {
            profile.has_symbol = true;
        }
    }
    Ok(profile)
}

/// AP policy: 20 characters, all four classes, and an uppercase or symbol
/// somewhere in the first four. Any violation (including characters outside
/// printable ASCII) is `false`, never an error.
pub fn check_ap_policy(ap: &str) -> bool {
    if ap.chars().count() != 20 {
        return false;
    }
    let Ok(profile) = classify(ap) else {
        return false;
    };
    if profile.class_count() != 4 {
        return false;
    }
    let head: String = ap.chars().take(4).collect();
    match classify(&head) {
        Ok(h) => h.has_upper || h.has_symbol,
        Err(_) => false,
    }
}

/// Both fields accept only `[a-z0-9]`, 1-15 characters. This is the gate
/// that makes replayed identifiers and APs dead on arrival.
pub fn field_accepts(_field: FieldKind, input: &str) -> bool {
    let len = input.chars().count();
    (1..=CREDENTIAL_MAX).contains(&len) && input.chars().all(is_credential_char)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_lowercases_and_strips() {
        assert_eq!(normalize_login_name("Benz428").unwrap(), "benz428");
        assert_eq!(normalize_login_name("a.b@c!8876").unwrap(), "abc8876");
    }

    #[test]
    fn normalize_rejects_short_results() {
        assert!(matches!(
            normalize_login_name("AB!"),
            Err(Error::InvalidLoginName { normalized_len: 2 })
        ));
        assert!(normalize_login_name("").is_err());
        assert!(normalize_login_name(&"a".repeat(16)).is_err());
    }

    #[test]
    fn normalize_is_idempotent() {
        for raw in ["Benz428", "a.b@c!8876", "XYZ99abc", "user-2024@host"] {
            if let Ok(once) = normalize_login_name(raw) {
                assert_eq!(normalize_login_name(&once).unwrap(), once);
            }
        }
    }

    #[test]
    fn password_validation() {
        assert!(validate_login_password("dp7a3k").is_ok());
        assert!(matches!(
            validate_login_password("dp7A3k"),
            Err(Error::InvalidLoginPassword(PasswordViolation::Charset))
        ));
        assert!(matches!(
            validate_login_password("abc1"),
            Err(Error::InvalidLoginPassword(PasswordViolation::Length))
        ));
        assert!(validate_login_password(&"a1".repeat(8)).is_err());
    }

    #[test]
    fn classify_flags() {
        let p = classify("aB3$").unwrap();
        assert!(p.has_upper && p.has_lower && p.has_digit && p.has_symbol);
        assert_eq!(p.class_count(), 4);

        let p = classify("abc").unwrap();
        assert!(p.has_lower && !p.has_upper && !p.has_digit && !p.has_symbol);
        assert_eq!(p.class_count(), 1);

        let p = classify("1234567890").unwrap();
        assert!(p.has_digit);
        assert_eq!(p.class_count(), 1);
    }

    #[test]
    fn classify_rejects_non_printable() {
        assert!(matches!(classify("ab c"), Err(Error::UnsupportedCharacter(' '))));
        assert!(classify("ab\tc").is_err());
        assert!(classify("héllo").is_err());
    }

    #[test]
    fn classify_partitions_printable_ascii() {
        // Every printable character lands in exactly one class.
        let mut symbols = 0;
        for b in 0x21..=0x7eu8 {
            let p = classify(&(b as char).to_string()).unwrap();
            assert_eq!(p.class_count(), 1, "char {:?}", b as char);
            if p.has_symbol {
                symbols += 1;
            }
        }
        assert_eq!(symbols, 32);
    }

    #[test]
    fn ap_policy() {
        assert!(check_ap_policy("aB3$aaaaaaaaaaaaaaaa"));
        assert!(!check_ap_policy(&"a".repeat(20)));
        assert!(!check_ap_policy("aB3$aaaaaaaaaaaaaaa")); // 19 chars
        // Four classes but the first four all lowercase/digit.
        assert!(!check_ap_policy("aaa3B$aaaaaaaaaaaaaa"));
        // Uppercase as the fourth character satisfies the head rule.
        assert!(check_ap_policy("aaaBc3$aaaaaaaaaaaaa"));
    }

    #[test]
    fn field_rules() {
        assert!(field_accepts(FieldKind::LnField, "benz428"));
        assert!(!field_accepts(FieldKind::LnField, "4O^&17R2zF="));
        assert!(!field_accepts(FieldKind::LpField, "z%9CP213Rp"));
        assert!(!field_accepts(FieldKind::LnField, ""));
        assert!(!field_accepts(FieldKind::LnField, &"a".repeat(16)));
        assert!(field_accepts(FieldKind::LpField, "a"));
        assert!(!field_accepts(FieldKind::LpField, "Abc"));
    }
}
