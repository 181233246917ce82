//! Adversarial scenarios. Each scenario mutates exactly one component of
//! an honest flow (or replays secret material into a field) and asserts
//! the gatekeepers repel it; `honest` is the control run that must be
//! granted. Exit code 0 means the outcome matched the expectation, 2 means
//! the defense failed.

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::ValueEnum;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use trident_core::{
    assemble_ap, build_matrix, combine_identity, normalize_login_name, render_identifier,
    ConverterKind, DeviceProfile, IdentityKind, MasterKey, RejectReason, Session, Stage, Store,
};

use crate::{idle_limit, load_device, random_device, record_stage, run_flow, trace_json, Cli, StageRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// Control run: the registered credentials on the registered device.
    Honest,
    /// Correct credentials typed on an attacker's own device.
    StolenPassword,
    /// Correct credentials on the right user's wrong device (one IMEI digit off).
    WrongDevice,
    /// The account's re-derived LN identifier pasted into the LN field.
    ReplayIdentifier,
    /// The account's authentication password pasted into the LP field.
    ReplayAp,
    /// Login password submitted before the login name.
    OutOfOrder,
}

impl Scenario {
    fn name(self) -> &'static str {
        match self {
            Scenario::Honest => "honest",
            Scenario::StolenPassword => "stolen-password",
            Scenario::WrongDevice => "wrong-device",
            Scenario::ReplayIdentifier => "replay-identifier",
            Scenario::ReplayAp => "replay-ap",
            Scenario::OutOfOrder => "out-of-order",
        }
    }

    fn expectation(self) -> (Stage, Option<RejectReason>) {
        match self {
            Scenario::Honest => (Stage::Granted, None),
            Scenario::StolenPassword | Scenario::WrongDevice => {
                (Stage::Rejected, Some(RejectReason::LnMismatch))
            }
            Scenario::ReplayIdentifier | Scenario::ReplayAp => {
                (Stage::Rejected, Some(RejectReason::FieldRejected))
            }
            Scenario::OutOfOrder => (Stage::Rejected, Some(RejectReason::OrderViolation)),
        }
    }
}

pub fn run(
    cli: &Cli,
    key: &MasterKey,
    rng: &mut ChaCha20Rng,
    scenario: Scenario,
    login_name: &str,
    login_password: &str,
) -> Result<ExitCode> {
    let device = load_device(&cli.device)?;
    let store = Store::open(&cli.store)?;

    // Scenarios reference a registered account; resolve it up front.
    let normalized = normalize_login_name(login_name).context("scenario login name is invalid")?;
    let digest = combine_identity(IdentityKind::Ln, Some(&normalized), &device)?.digest;
    let record = store
        .get_by_ln_digest(&digest)
        .context("scenario requires the account to be registered for this device")?;

    let (expected_stage, expected_reason) = scenario.expectation();

    let mut session;
    let trace: Vec<StageRecord> = match scenario {
        Scenario::Honest => {
            session = Session::begin_with_idle_limit(rng, device.clone(), idle_limit(cli));
            run_flow(key, &store, &mut session, login_name, login_password)
        }
        Scenario::StolenPassword => {
            let attacker_device = random_device(rng, None);
            session = Session::begin_with_idle_limit(rng, attacker_device, idle_limit(cli));
            run_flow(key, &store, &mut session, login_name, login_password)
        }
        Scenario::WrongDevice => {
            let mut imei: Vec<u8> = device.imei().bytes().collect();
            let idx = rng.gen_range(0..imei.len());
            imei[idx] = b'0' + (imei[idx] - b'0' + 1) % 10;
            let wrong = DeviceProfile::new(
                String::from_utf8(imei).unwrap(),
                device.imsi(),
                device.phone_number(),
            )?;
            session = Session::begin_with_idle_limit(rng, wrong, idle_limit(cli));
            run_flow(key, &store, &mut session, login_name, login_password)
        }
        Scenario::ReplayIdentifier => {
            let matrix = build_matrix(
                key,
                &record.nonce,
                ConverterKind::Ln,
                &normalized,
                device.imei(),
                device.imsi(),
                record.ln_attempt,
            )?;
            let identifier = render_identifier(&matrix, &record.ln_descriptor)?;
            session = Session::begin_with_idle_limit(rng, device.clone(), idle_limit(cli));
            let mut trace = Vec::new();
            let before = session.stage();
            let result = session.submit_login_name(key, &store, &identifier);
            record_stage(&mut trace, before, "login_name", result);
            trace
        }
        Scenario::ReplayAp => {
            let matrix = build_matrix(
                key,
                &record.nonce,
                ConverterKind::Lp,
                login_password,
                device.imei(),
                device.imsi(),
                record.lp_attempt,
            )?;
            let ap = assemble_ap(&matrix);
            session = Session::begin_with_idle_limit(rng, device.clone(), idle_limit(cli));
            let mut trace = Vec::new();
            let before = session.stage();
            let result = session.submit_login_name(key, &store, login_name);
            if record_stage(&mut trace, before, "login_name", result) {
                let before = session.stage();
                let result = session.submit_login_password(key, &store, &ap);
                record_stage(&mut trace, before, "login_password", result);
            }
            trace
        }
        Scenario::OutOfOrder => {
            session = Session::begin_with_idle_limit(rng, device.clone(), idle_limit(cli));
            let mut trace = Vec::new();
            let before = session.stage();
            let result = session.submit_login_password(key, &store, login_password);
            record_stage(&mut trace, before, "login_password", result);
            trace
        }
    };

    let as_expected =
        session.stage() == expected_stage && session.reject_reason() == expected_reason;
    let stopped_at = trace.last().map(|r| r.stage).unwrap_or(Stage::AwaitLn);

    if cli.json {
        let mut doc = trace_json(&trace, &session);
        doc["scenario"] = json!(scenario.name());
        doc["expected_final_state"] = json!(expected_stage.to_string());
        doc["expected_reject_reason"] = json!(expected_reason.map(|r| r.to_string()));
        doc["stopped_at"] = json!(stopped_at.to_string());
        doc["defended"] = json!(as_expected);
        println!("{doc}");
    } else {
        let expectation = match expected_reason {
            Some(reason) => format!("{expected_stage} ({reason})"),
            None => expected_stage.to_string(),
        };
        println!("scenario {}: expecting {expectation}", scenario.name());
        crate::print_trace(&trace, &session);
        if as_expected {
            match scenario {
                Scenario::Honest => println!("control flow granted as expected"),
                _ => println!("defended: attack repelled at {stopped_at}"),
            }
        } else {
            println!(
                "PROPERTY VIOLATION: ended {} ({:?}), expected {} ({:?})",
                session.stage(),
                session.reject_reason().map(|r| r.to_string()),
                expected_stage,
                expected_reason.map(|r| r.to_string()),
            );
        }
    }

    Ok(if as_expected { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
