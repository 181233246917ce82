//! Built-in invariant suite: a fast, self-contained pass over the scheme's
//! core properties using a throwaway in-memory fixture. Prints one line per
//! check plus pass/fail counts; exit code 0 only when everything holds.

use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use trident_core::{
    assemble_ap, build_matrix, check_ap_policy, combine_identity, field_accepts, new_stream,
    register_account, render_identifier, verify_commitment, AccountRecord, ConverterKind,
    DeviceProfile, FieldKind, IdentityKind, MasterKey, Outcome, Session, Stage, StreamContext,
    Store, AP_LEN,
};

use crate::{random_device, Cli};

const ACCOUNTS: usize = 200;

struct Account {
    login_name: String,
    password: String,
    device: DeviceProfile,
    record: AccountRecord,
    ln_identifier: String,
    lp_identifier: String,
    ap: String,
}

struct Outcome2 {
    name: &'static str,
    passed: bool,
    detail: String,
}

pub fn run(cli: &Cli, key: &MasterKey, rng: &mut ChaCha20Rng) -> Result<ExitCode> {
    let started = Instant::now();
    let mut store = Store::in_memory();
    let accounts = build_accounts(key, rng, &mut store, ACCOUNTS);

    let mut results: Vec<Outcome2> = Vec::new();
    let mut check = |name: &'static str, r: std::result::Result<String, String>| {
        results.push(match r {
            Ok(detail) => Outcome2 { name, passed: true, detail },
            Err(detail) => Outcome2 { name, passed: false, detail },
        });
    };

    check("keystream-determinism", keystream_determinism(key, rng));
    check("keystream-uniformity", keystream_uniformity(key));
    check("ap-policy", ap_policy(&accounts));
    check("field-gatekeeping", field_gatekeeping(&accounts));
    check("shuffle-permutation", shuffle_permutation(key, rng));
    check("flow-completeness", flow_completeness(key, rng, &store, &accounts));
    check("flow-soundness", flow_soundness(key, rng, &store, &accounts));
    check("store-roundtrip-secrecy", store_roundtrip_secrecy(&store, &accounts));
    check("commitment-regeneration", commitment_regeneration(&accounts));

    let passed = results.iter().filter(|r| r.passed).count();
    let failed = results.len() - passed;

    if cli.json {
        println!(
            "{}",
            json!({
                "checks": results
                    .iter()
                    .map(|r| json!({ "name": r.name, "passed": r.passed, "detail": r.detail }))
                    .collect::<Vec<_>>(),
                "passed": passed,
                "failed": failed,
                "elapsed_ms": started.elapsed().as_millis(),
            })
        );
    } else {
        for r in &results {
            if r.passed {
                println!("ok   {}: {}", r.name, r.detail);
            } else {
                println!("FAIL {}: {}", r.name, r.detail);
            }
        }
        println!(
            "selftest: {passed} passed, {failed} failed ({:?})",
            started.elapsed()
        );
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn random_credential(rng: &mut ChaCha20Rng) -> String {
    let set = b"abcdefghijklmnopqrstuvwxyz0123456789";
    (0..rng.gen_range(8..=15))
        .map(|_| set[rng.gen_range(0..set.len())] as char)
        .collect()
}

fn build_accounts(
    key: &MasterKey,
    rng: &mut ChaCha20Rng,
    store: &mut Store,
    n: usize,
) -> Vec<Account> {
    let mut accounts = Vec::with_capacity(n);
    while accounts.len() < n {
        let login_name = random_credential(rng);
        let password = random_credential(rng);
        let device = random_device(rng, None);
        match register_account(key, rng, store, &device, &login_name, &password) {
            Ok(record) => {
                let ln_matrix = build_matrix(
                    key,
                    &record.nonce,
                    ConverterKind::Ln,
                    &login_name,
                    device.imei(),
                    device.imsi(),
                    record.ln_attempt,
                )
                .expect("rebuild");
                let lp_matrix = build_matrix(
                    key,
                    &record.nonce,
                    ConverterKind::Lp,
                    &password,
                    device.imei(),
                    device.imsi(),
                    record.lp_attempt,
                )
                .expect("rebuild");
                let ln_identifier = render_identifier(&ln_matrix, &record.ln_descriptor).expect("render");
                let lp_identifier = render_identifier(&lp_matrix, &record.lp_descriptor).expect("render");
                let ap = assemble_ap(&lp_matrix);
                accounts.push(Account {
                    login_name,
                    password,
                    device,
                    record,
                    ln_identifier,
                    lp_identifier,
                    ap,
                });
            }
            Err(_) => continue,
        }
    }
    accounts
}

fn keystream_determinism(key: &MasterKey, rng: &mut ChaCha20Rng) -> std::result::Result<String, String> {
    for i in 0..50 {
        let mut nonce = [0u8; 16];
        rng.fill_bytes(&mut nonce);
        let credential = random_credential(rng);
        let ctx = StreamContext {
            nonce: &nonce,
            kind: ConverterKind::Lp,
            credential: &credential,
            imei: "490154203237518",
            imsi: "310150123456789",
            attempt: i % 64,
        };
        let mut a = new_stream(key, &ctx).map_err(|e| e.to_string())?;
        let mut b = new_stream(key, &ctx).map_err(|e| e.to_string())?;
        let (mut ba, mut bb) = ([0u8; 48], [0u8; 48]);
        a.fill(&mut ba);
        b.fill(&mut bb);
        if ba != bb {
            return Err("twin streams diverged".into());
        }
        let ctx2 = StreamContext { attempt: (i + 1) % 64, ..ctx };
        let mut c = new_stream(key, &ctx2).map_err(|e| e.to_string())?;
        let mut bc = [0u8; 48];
        c.fill(&mut bc);
        if ba == bc {
            return Err("attempt change did not move the stream".into());
        }
    }
    Ok("50 contexts deterministic and attempt-sensitive".into())
}

fn keystream_uniformity(key: &MasterKey) -> std::result::Result<String, String> {
    let nonce = [7u8; 16];
    let ctx = StreamContext {
        nonce: &nonce,
        kind: ConverterKind::Ln,
        credential: "selftest",
        imei: "490154203237518",
        imsi: "310150123456789",
        attempt: 0,
    };
    let mut s = new_stream(key, &ctx).map_err(|e| e.to_string())?;
    let mut counts = [0u32; 5];
    for _ in 0..10_000 {
        counts[(s.next_uint(1, 5) - 1) as usize] += 1;
    }
    for (i, &c) in counts.iter().enumerate() {
        if !(1800..=2200).contains(&c) {
            return Err(format!("value {} drawn {c} times of 10000", i + 1));
        }
    }
    Ok(format!("next_uint(1,5) counts {counts:?}"))
}

fn ap_policy(accounts: &[Account]) -> std::result::Result<String, String> {
    for a in accounts {
        if a.ap.chars().count() != AP_LEN || !check_ap_policy(&a.ap) {
            return Err(format!("AP policy violated for {:?}", a.login_name));
        }
    }
    Ok(format!("{} APs pass length/class/head rules", accounts.len()))
}

fn field_gatekeeping(accounts: &[Account]) -> std::result::Result<String, String> {
    for a in accounts {
        for text in [&a.ln_identifier, &a.lp_identifier, &a.ap] {
            if field_accepts(FieldKind::LnField, text) || field_accepts(FieldKind::LpField, text) {
                return Err(format!("field accepted secret material {text:?}"));
            }
        }
    }
    Ok(format!("{} secrets rejected by both fields", accounts.len() * 3))
}

fn shuffle_permutation(key: &MasterKey, rng: &mut ChaCha20Rng) -> std::result::Result<String, String> {
    for _ in 0..200 {
        let mut nonce = [0u8; 16];
        rng.fill_bytes(&mut nonce);
        let credential = random_credential(rng);
        let m = build_matrix(
            key,
            &nonce,
            ConverterKind::Lp,
            &credential,
            "490154203237518",
            "310150123456789",
            0,
        )
        .map_err(|e| e.to_string())?;
        let ap = assemble_ap(&m);
        let mut got: Vec<char> = ap.chars().collect();
        let mut want: Vec<char> = m.rows.iter().flat_map(|r| r.converted.chars()).collect();
        got.sort_unstable();
        want.sort_unstable();
        if got != want {
            return Err(format!("assembly is not a permutation for {credential:?}"));
        }
    }
    Ok("200 assemblies are exact character permutations".into())
}

fn flow_completeness(
    key: &MasterKey,
    rng: &mut ChaCha20Rng,
    store: &Store,
    accounts: &[Account],
) -> std::result::Result<String, String> {
    for a in accounts {
        let mut session = Session::begin(rng, a.device.clone());
        session.submit_login_name(key, store, &a.login_name);
        session.submit_login_password(key, store, &a.password);
        session.finalize(key, store);
        if session.stage() != Stage::Granted {
            return Err(format!(
                "honest flow for {:?} ended {} ({:?})",
                a.login_name,
                session.stage(),
                session.reject_reason()
            ));
        }
    }
    Ok(format!("{} honest flows granted", accounts.len()))
}

fn flow_soundness(
    key: &MasterKey,
    rng: &mut ChaCha20Rng,
    store: &Store,
    accounts: &[Account],
) -> std::result::Result<String, String> {
    for a in accounts.iter().take(50) {
        // Wrong login name: rejected at stage 1.
        let mut mutated = a.login_name.clone();
        let last = mutated.pop().unwrap();
        mutated.push(if last == 'a' { 'b' } else { 'a' });
        let mut session = Session::begin(rng, a.device.clone());
        if session.submit_login_name(key, store, &mutated).outcome != Outcome::Reject {
            return Err("mutated login name advanced".into());
        }

        // Wrong password: rejected at stage 2.
        let mut mutated = a.password.clone();
        let last = mutated.pop().unwrap();
        mutated.push(if last == 'a' { 'b' } else { 'a' });
        let mut session = Session::begin(rng, a.device.clone());
        if session.submit_login_name(key, store, &a.login_name).outcome != Outcome::Advance {
            return Err("honest login name rejected".into());
        }
        if session.submit_login_password(key, store, &mutated).outcome != Outcome::Reject {
            return Err("mutated password advanced".into());
        }

        // Wrong IMEI and IMSI: rejected at stage 1.
        for flip_imei in [true, false] {
            let mutate = |s: &str| -> String {
                let mut b: Vec<u8> = s.bytes().collect();
                b[7] = b'0' + (b[7] - b'0' + 1) % 10;
                String::from_utf8(b).unwrap()
            };
            let device = if flip_imei {
                DeviceProfile::new(mutate(a.device.imei()), a.device.imsi(), "x").unwrap()
            } else {
                DeviceProfile::new(a.device.imei(), mutate(a.device.imsi()), "x").unwrap()
            };
            let mut session = Session::begin(rng, device);
            if session.submit_login_name(key, store, &a.login_name).outcome != Outcome::Reject {
                return Err("mutated device advanced".into());
            }
        }
    }
    Ok("50 accounts x 4 single-component mutations rejected at earliest stage".into())
}

fn store_roundtrip_secrecy(store: &Store, accounts: &[Account]) -> std::result::Result<String, String> {
    let path = std::env::temp_dir().join(format!("trident-selftest-{}.json", std::process::id()));
    let run = (|| -> std::result::Result<String, String> {
        store.persist_to(&path).map_err(|e| e.to_string())?;
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        for a in accounts {
            for secret in [&a.login_name, &a.password, &a.ln_identifier, &a.lp_identifier, &a.ap] {
                if text.contains(secret.as_str()) {
                    return Err(format!("plaintext {secret:?} found in store file"));
                }
            }
        }
        let reopened = Store::open(&path).map_err(|e| e.to_string())?;
        if reopened.records() != store.records() {
            return Err("round-trip changed the records".into());
        }
        Ok(format!("{} records round-trip, zero plaintext hits", store.len()))
    })();
    let _ = std::fs::remove_file(&path);
    run
}

fn commitment_regeneration(accounts: &[Account]) -> std::result::Result<String, String> {
    for a in accounts.iter().take(50) {
        if !verify_commitment(&a.ln_identifier, &a.record.ln_commitment)
            || !verify_commitment(&a.lp_identifier, &a.record.lp_commitment)
            || !verify_commitment(&a.ap, &a.record.ap_commitment)
        {
            return Err(format!("commitment mismatch for {:?}", a.login_name));
        }
        let ap_identity = combine_identity(IdentityKind::Ap, None, &a.device).map_err(|e| e.to_string())?;
        if ap_identity.digest != a.record.ap_identity.digest {
            return Err("AP identity digest mismatch".into());
        }
    }
    Ok("50 accounts regenerate and verify from stored fields".into())
}
