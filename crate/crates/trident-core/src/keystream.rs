//! Deterministic keyed byte stream backing all converter randomness.
//!
//! A converter must be reproducible at verification time: the server holds
//! no copy of it, only the master key and the account's nonce and attempt
//! counter. Every "random" intermediate element is therefore drawn from an
//! HMAC-SHA-256 counter-mode stream seeded over the full account context.
//! Same key and context, same bytes, always.
//!
//! The seed is `HMAC-SHA-256(master_key, encode(ctx))` where `encode`
//! length-prefixes every context field (4-byte big-endian length before the
//! field bytes, fields in declaration order). Block `i` of the stream is
//! `HMAC-SHA-256(seed, i as 8-byte big-endian)`.

use std::fmt;

use hmac::{Hmac, Mac};
use sha2::Sha256;

use crate::error::{Error, Result};

type HmacSha256 = Hmac<Sha256>;

/// Attempt counters live in `[0, 64)`; hitting the cap means the keystream
/// failed to satisfy a policy 64 times in a row, which a working stream
/// does not do.
pub const MAX_ATTEMPTS: u32 = 64;

/// Server-side secret from which every converter is derived.
///
/// Never serialized into the credential store; the CLI reads it from the
/// `TRIDENT_MASTER_KEY` environment variable as 64 hex characters.
#[derive(Clone)]
pub struct MasterKey([u8; 32]);

impl MasterKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        MasterKey(bytes)
    }

    /// Parses exactly 64 hex characters.
    pub fn from_hex(s: &str) -> Result<Self> {
        let raw = hex::decode(s.trim())
            .map_err(|_| Error::InvalidMasterKey("not valid hex".into()))?;
        let bytes: [u8; 32] = raw
            .try_into()
            .map_err(|_| Error::InvalidMasterKey("need exactly 64 hex characters".into()))?;
        Ok(MasterKey(bytes))
    }

    fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

// Key material stays out of debug output.
impl fmt::Debug for MasterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MasterKey(..)")
    }
}

/// Which converter a stream feeds. LN and LP converters of one account use
/// the same nonce; the kind tag keeps their streams disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConverterKind {
    Ln,
    Lp,
}

impl ConverterKind {
    fn tag(self) -> &'static [u8] {
        match self {
            ConverterKind::Ln => b"LN",
            ConverterKind::Lp => b"LP",
        }
    }
}

impl fmt::Display for ConverterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConverterKind::Ln => f.write_str("LN"),
            ConverterKind::Lp => f.write_str("LP"),
        }
    }
}

/// Everything that seeds a stream. Changing any field changes the stream.
#[derive(Debug, Clone, Copy)]
pub struct StreamContext<'a> {
    pub nonce: &'a [u8; 16],
    pub kind: ConverterKind,
    pub credential: &'a str,
    pub imei: &'a str,
    pub imsi: &'a str,
    pub attempt: u32,
}

/// 4-byte big-endian length prefix before the field bytes. Prefixes keep
/// field boundaries unambiguous: ("ab","c") and ("a","bc") encode
/// differently.
pub(crate) fn push_field(out: &mut Vec<u8>, f: &[u8]) {
    out.extend_from_slice(&(f.len() as u32).to_be_bytes());
    out.extend_from_slice(f);
}

impl StreamContext<'_> {
    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.credential.len());
        push_field(&mut out, self.nonce);
        push_field(&mut out, self.kind.tag());
        push_field(&mut out, self.credential.as_bytes());
        push_field(&mut out, self.imei.as_bytes());
        push_field(&mut out, self.imsi.as_bytes());
        push_field(&mut out, &u64::from(self.attempt).to_be_bytes());
        out
    }
}

/// Expanding deterministic byte stream.
pub struct Stream {
    seed: [u8; 32],
    counter: u64,
    block: [u8; 32],
    used: usize,
}

/// Seeds a stream for the given key and context.
pub fn new_stream(key: &MasterKey, ctx: &StreamContext) -> Result<Stream> {
    if ctx.attempt >= MAX_ATTEMPTS {
        return Err(Error::DerivationExhausted);
    }
    let mut mac = HmacSha256::new_from_slice(key.as_bytes()).expect("HMAC accepts any key size");
    mac.update(&ctx.encode());
    let seed: [u8; 32] = mac.finalize().into_bytes().into();
    Ok(Stream {
        seed,
        counter: 0,
        block: [0u8; 32],
        used: 32,
    })
}

impl Stream {
    fn refill(&mut self) {
        let mut mac =
            HmacSha256::new_from_slice(&self.seed).expect("HMAC accepts any key size");
        mac.update(&self.counter.to_be_bytes());
        self.block = mac.finalize().into_bytes().into();
        self.counter += 1;
        self.used = 0;
    }

    fn next_byte(&mut self) -> u8 {
        if self.used == 32 {
            self.refill();
        }
        let b = self.block[self.used];
        self.used += 1;
        b
    }

    pub fn fill(&mut self, out: &mut [u8]) {
        for b in out.iter_mut() {
            *b = self.next_byte();
        }
    }

    /// Uniform integer in `[lo, hi]`, inclusive, by rejection sampling on
    /// the minimal number of whole bytes covering the range width. A
    /// degenerate range consumes no bytes.
    pub fn next_uint(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi, "next_uint requires lo <= hi");
        if lo == hi {
            return lo;
        }
        let width = (hi - lo) as u128 + 1;
        let mut n_bytes = 0usize;
        let mut cap: u128 = 1;
        while cap < width {
            cap <<= 8;
            n_bytes += 1;
        }
        let limit = (cap / width) * width;
        loop {
            let mut v: u128 = 0;
            for _ in 0..n_bytes {
                v = (v << 8) | u128::from(self.next_byte());
            }
            if v < limit {
                return lo + (v % width) as u64;
            }
        }
    }

    /// Uniform pick from a non-empty ASCII character set.
    pub fn next_char(&mut self, charset: &[u8]) -> char {
        assert!(!charset.is_empty(), "next_char requires a non-empty charset");
        let idx = self.next_uint(0, charset.len() as u64 - 1);
        charset[idx as usize] as char
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn test_key() -> MasterKey {
        MasterKey::from_bytes([7u8; 32])
    }

    fn ctx<'a>(nonce: &'a [u8; 16], credential: &'a str, attempt: u32) -> StreamContext<'a> {
        StreamContext {
            nonce,
            kind: ConverterKind::Ln,
            credential,
            imei: "490154203237518",
            imsi: "310150123456789",
            attempt,
        }
    }

    #[test]
    fn identical_context_identical_bytes() {
        let nonce = [1u8; 16];
        let mut a = new_stream(&test_key(), &ctx(&nonce, "benz428", 0)).unwrap();
        let mut b = new_stream(&test_key(), &ctx(&nonce, "benz428", 0)).unwrap();
        let (mut ba, mut bb) = ([0u8; 64], [0u8; 64]);
        a.fill(&mut ba);
        b.fill(&mut bb);
        assert_eq!(ba, bb);
    }

    #[test]
    fn attempt_changes_stream() {
        let nonce = [1u8; 16];
        let mut a = new_stream(&test_key(), &ctx(&nonce, "benz428", 0)).unwrap();
        let mut b = new_stream(&test_key(), &ctx(&nonce, "benz428", 1)).unwrap();
        let (mut ba, mut bb) = ([0u8; 64], [0u8; 64]);
        a.fill(&mut ba);
        b.fill(&mut bb);
        assert_ne!(ba, bb);
    }

    #[test]
    fn attempt_cap_is_enforced() {
        let nonce = [1u8; 16];
        assert!(matches!(
            new_stream(&test_key(), &ctx(&nonce, "benz428", MAX_ATTEMPTS)),
            Err(Error::DerivationExhausted)
        ));
        assert!(new_stream(&test_key(), &ctx(&nonce, "benz428", MAX_ATTEMPTS - 1)).is_ok());
    }

    #[test]
    fn length_prefixing_separates_adjacent_fields() {
        // ("ab","c") vs ("a","bc"): same concatenated bytes, different fields.
        let nonce = [0u8; 16];
        let c1 = StreamContext {
            nonce: &nonce,
            kind: ConverterKind::Ln,
            credential: "ab",
            imei: "c",
            imsi: "",
            attempt: 0,
        };
        let c2 = StreamContext {
            nonce: &nonce,
            kind: ConverterKind::Ln,
            credential: "a",
            imei: "bc",
            imsi: "",
            attempt: 0,
        };
        assert_ne!(c1.encode(), c2.encode());
        let mut a = new_stream(&test_key(), &c1).unwrap();
        let mut b = new_stream(&test_key(), &c2).unwrap();
        let (mut ba, mut bb) = ([0u8; 32], [0u8; 32]);
        a.fill(&mut ba);
        b.fill(&mut bb);
        assert_ne!(ba, bb);
    }

    #[test]
    fn degenerate_range_consumes_no_bytes() {
        let nonce = [2u8; 16];
        let mut a = new_stream(&test_key(), &ctx(&nonce, "benz428", 0)).unwrap();
        let mut b = new_stream(&test_key(), &ctx(&nonce, "benz428", 0)).unwrap();
        assert_eq!(a.next_uint(5, 5), 5);
        // a's position must be unchanged relative to b.
        let (mut ba, mut bb) = ([0u8; 16], [0u8; 16]);
        a.fill(&mut ba);
        b.fill(&mut bb);
        assert_eq!(ba, bb);
    }

    #[test]
    fn replay_from_same_position_repeats() {
        let nonce = [3u8; 16];
        let mut a = new_stream(&test_key(), &ctx(&nonce, "dp7a3k", 0)).unwrap();
        let mut b = new_stream(&test_key(), &ctx(&nonce, "dp7a3k", 0)).unwrap();
        for _ in 0..100 {
            assert_eq!(a.next_uint(1, 20), b.next_uint(1, 20));
        }
    }

    #[test]
    fn singleton_charset() {
        let nonce = [4u8; 16];
        let mut s = new_stream(&test_key(), &ctx(&nonce, "benz428", 0)).unwrap();
        assert_eq!(s.next_char(b"!"), '!');
    }

    #[test]
    fn determinism_over_random_contexts() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..100 {
            let mut key_bytes = [0u8; 32];
            rng.fill_bytes(&mut key_bytes);
            let key = MasterKey::from_bytes(key_bytes);
            let mut nonce = [0u8; 16];
            rng.fill_bytes(&mut nonce);
            let credential: String = (0..rng.gen_range(5..=15))
                .map(|_| char::from(rng.gen_range(b'a'..=b'z')))
                .collect();
            let c = ctx(&nonce, &credential, rng.gen_range(0..MAX_ATTEMPTS));
            let mut a = new_stream(&key, &c).unwrap();
            let mut b = new_stream(&key, &c).unwrap();
            let (mut ba, mut bb) = ([0u8; 48], [0u8; 48]);
            a.fill(&mut ba);
            b.fill(&mut bb);
            assert_eq!(ba, bb);
        }
    }

    #[test]
    fn single_byte_flips_change_output() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        for _ in 0..100 {
            let mut key_bytes = [0u8; 32];
            rng.fill_bytes(&mut key_bytes);
            let mut nonce = [0u8; 16];
            rng.fill_bytes(&mut nonce);
            let credential: String = (0..10)
                .map(|_| char::from(rng.gen_range(b'a'..=b'z')))
                .collect();
            let imei: String = (0..15)
                .map(|_| char::from(rng.gen_range(b'0'..=b'9')))
                .collect();
            let imsi: String = (0..15)
                .map(|_| char::from(rng.gen_range(b'0'..=b'9')))
                .collect();

            let baseline = {
                let c = StreamContext {
                    nonce: &nonce,
                    kind: ConverterKind::Lp,
                    credential: &credential,
                    imei: &imei,
                    imsi: &imsi,
                    attempt: 0,
                };
                let mut s = new_stream(&MasterKey::from_bytes(key_bytes), &c).unwrap();
                let mut out = [0u8; 32];
                s.fill(&mut out);
                out
            };

            // Flip one byte in one randomly chosen field.
            let mut key_bytes2 = key_bytes;
            let mut nonce2 = nonce;
            let mut credential2 = credential.clone().into_bytes();
            let mut imei2 = imei.clone().into_bytes();
            let mut imsi2 = imsi.clone().into_bytes();
            match rng.gen_range(0..5) {
                0 => {
                    let i = rng.gen_range(0..32);
                    key_bytes2[i] ^= rng.gen_range(1..=255u8);
                }
                1 => {
                    let i = rng.gen_range(0..16);
                    nonce2[i] ^= 1;
                }
                2 => {
                    let i = rng.gen_range(0..credential2.len());
                    credential2[i] = if credential2[i] == b'a' { b'b' } else { b'a' };
                }
                3 => {
                    let i = rng.gen_range(0..15);
                    imei2[i] = if imei2[i] == b'0' { b'1' } else { b'0' };
                }
                _ => {
                    let i = rng.gen_range(0..15);
                    imsi2[i] = if imsi2[i] == b'0' { b'1' } else { b'0' };
                }
            }
            let credential2 = String::from_utf8(credential2).unwrap();
            let imei2 = String::from_utf8(imei2).unwrap();
            let imsi2 = String::from_utf8(imsi2).unwrap();
            let c = StreamContext {
                nonce: &nonce2,
                kind: ConverterKind::Lp,
                credential: &credential2,
                imei: &imei2,
                imsi: &imsi2,
                attempt: 0,
            };
            let mut s = new_stream(&MasterKey::from_bytes(key_bytes2), &c).unwrap();
            let mut flipped = [0u8; 32];
            s.fill(&mut flipped);
            assert_ne!(baseline, flipped);
        }
    }

    #[test]
    fn next_uint_is_roughly_uniform() {
        let nonce = [5u8; 16];
        let mut s = new_stream(&test_key(), &ctx(&nonce, "benz428", 0)).unwrap();
        let mut counts = [0u32; 5];
        for _ in 0..10_000 {
            counts[(s.next_uint(1, 5) - 1) as usize] += 1;
        }
        for &c in &counts {
            assert!((1800..=2200).contains(&c), "count {c} outside [1800,2200]");
        }
    }

    #[test]
    fn charset_coverage() {
        let charset: Vec<u8> = (0x21..=0x7eu8).collect();
        let nonce = [6u8; 16];
        let mut s = new_stream(&test_key(), &ctx(&nonce, "benz428", 0)).unwrap();
        let mut seen = [false; 94];
        for _ in 0..94_000 {
            let c = s.next_char(&charset);
            seen[c as usize - 0x21] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn master_key_hex_parsing() {
        assert!(MasterKey::from_hex(&"ab".repeat(32)).is_ok());
        assert!(MasterKey::from_hex("deadbeef").is_err());
        assert!(MasterKey::from_hex(&"zz".repeat(32)).is_err());
        let dbg = format!("{:?}", MasterKey::from_bytes([0x41; 32]));
        assert!(!dbg.contains("41"));
    }
}
