//! `trident`: operator harness for the triple-identity login scheme.
//!
//! Creates simulated device profiles, registers accounts into a file-backed
//! store, runs honest and adversarial login flows, and renders converters
//! for debugging. The master key comes from `TRIDENT_MASTER_KEY` (64 hex
//! characters); every command refuses to start without it.
//!
//! Exit codes: 0 success (for `attack`: the attack was repelled), 1 the
//! login flow was rejected or the inputs violated policy, 2 operational
//! errors and attack-harness property violations.

mod attack;
mod selftest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use trident_core::{
    assemble_ap, build_matrix, classify, register_account, ConverterKind, DeviceProfile, Error,
    MasterKey, Outcome, Session, Stage, StageResult, Store,
};

const MASTER_KEY_ENV: &str = "TRIDENT_MASTER_KEY";

#[derive(Parser)]
#[command(name = "trident", version, about = "Triple-identity authentication simulator")]
struct Cli {
    /// Credential store file.
    #[arg(long, global = true, default_value = "store.json")]
    store: PathBuf,

    /// Device profile file.
    #[arg(long, global = true, default_value = "device.json")]
    device: PathBuf,

    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Seed for reproducible runs; defaults to OS entropy.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Session idle limit in seconds.
    #[arg(long, global = true, default_value_t = 300)]
    session_timeout: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manage simulated smartphone profiles.
    Device {
        #[command(subcommand)]
        command: DeviceCommand,
    },
    /// Register an account into the store.
    Register {
        login_name: String,
        login_password: String,
    },
    /// Run the three-stage login flow.
    Login {
        login_name: String,
        login_password: String,
    },
    /// Run an adversarial scenario against a registered account.
    /// Exits 0 when the defense holds.
    Attack {
        scenario: attack::Scenario,
        /// The registered login name the scenario targets.
        #[arg(long)]
        login_name: String,
        /// The registered login password the scenario targets.
        #[arg(long)]
        login_password: String,
    },
    /// Render a converter table. DEBUG — reveals secrets; requires --unsafe.
    InspectConverter {
        kind: KindArg,
        credential: String,
        /// Account nonce as 32 hex characters.
        #[arg(long, default_value = "00000000000000000000000000000000")]
        nonce: String,
        /// Derivation attempt counter.
        #[arg(long, default_value_t = 0)]
        attempt: u32,
        /// Acknowledge that secret material will be printed.
        #[arg(long = "unsafe")]
        unsafe_ok: bool,
    },
    /// Run the built-in invariant suite and print pass/fail counts.
    Selftest,
}

#[derive(Subcommand)]
enum DeviceCommand {
    /// Generate a device profile and write it to the device file.
    Create {
        /// Phone number to record; generated when omitted.
        #[arg(long)]
        phone: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Ln,
    Lp,
}

impl From<KindArg> for ConverterKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Ln => ConverterKind::Ln,
            KindArg::Lp => ConverterKind::Lp,
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    let key = load_master_key()?;
    let mut rng = make_rng(cli.seed);

    match &cli.command {
        Command::Device { command: DeviceCommand::Create { phone } } => {
            cmd_device_create(&cli, &mut rng, phone.clone())
        }
        Command::Register { login_name, login_password } => {
            cmd_register(&cli, &key, &mut rng, login_name, login_password)
        }
        Command::Login { login_name, login_password } => {
            cmd_login(&cli, &key, &mut rng, login_name, login_password)
        }
        Command::Attack { scenario, login_name, login_password } => {
            attack::run(&cli, &key, &mut rng, *scenario, login_name, login_password)
        }
        Command::InspectConverter { kind, credential, nonce, attempt, unsafe_ok } => {
            cmd_inspect_converter(&cli, &key, *kind, credential, nonce, *attempt, *unsafe_ok)
        }
        Command::Selftest => selftest::run(&cli, &key, &mut rng),
    }
}

fn load_master_key() -> Result<MasterKey> {
    let value = std::env::var(MASTER_KEY_ENV)
        .with_context(|| format!("{MASTER_KEY_ENV} must be set to 64 hex characters"))?;
    MasterKey::from_hex(&value).with_context(|| format!("{MASTER_KEY_ENV} is malformed"))
}

fn make_rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn load_device(path: &Path) -> Result<DeviceProfile> {
    let raw = fs::read_to_string(path)
        .with_context(|| format!("cannot read device profile {}", path.display()))?;
    serde_json::from_str(&raw)
        .with_context(|| format!("invalid device profile {}", path.display()))
}

fn idle_limit(cli: &Cli) -> Duration {
    Duration::from_secs(cli.session_timeout)
}

fn random_digits(rng: &mut ChaCha20Rng, n: usize) -> String {
    (0..n).map(|_| char::from(rng.gen_range(b'0'..=b'9'))).collect()
}

pub(crate) fn random_device(rng: &mut ChaCha20Rng, phone: Option<String>) -> DeviceProfile {
    let imei = random_digits(rng, 15);
    let imsi = random_digits(rng, 15);
    let phone = phone.unwrap_or_else(|| format!("+1555{}", random_digits(rng, 7)));
    DeviceProfile::new(imei, imsi, phone).expect("generated digits are valid")
}

fn cmd_device_create(cli: &Cli, rng: &mut ChaCha20Rng, phone: Option<String>) -> Result<ExitCode> {
    let device = random_device(rng, phone);
    let body = serde_json::to_string_pretty(&device)?;
    fs::write(&cli.device, body)
        .with_context(|| format!("cannot write device profile {}", cli.device.display()))?;

    if cli.json {
        println!(
            "{}",
            json!({
                "imei": device.imei(),
                "imsi": device.imsi(),
                "phone_number": device.phone_number(),
                "path": cli.device.display().to_string(),
            })
        );
    } else {
        println!("device profile written to {}", cli.device.display());
        println!("  imei:  {}", device.imei());
        println!("  imsi:  {}", device.imsi());
        println!("  phone: {}", device.phone_number());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_register(
    cli: &Cli,
    key: &MasterKey,
    rng: &mut ChaCha20Rng,
    login_name: &str,
    login_password: &str,
) -> Result<ExitCode> {
    let device = load_device(&cli.device)?;
    let mut store = Store::open(&cli.store)?;
    match register_account(key, rng, &mut store, &device, login_name, login_password) {
        Ok(record) => {
            if cli.json {
                println!(
                    "{}",
                    json!({
                        "account_id": hex::encode(record.account_id),
                        "store": cli.store.display().to_string(),
                    })
                );
            } else {
                println!("registered account {}", hex::encode(record.account_id));
                println!("store: {}", cli.store.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(e @ (Error::InvalidLoginName { .. } | Error::InvalidLoginPassword(_) | Error::DuplicateIdentity)) => {
            if cli.json {
                println!("{}", json!({ "error": e.to_string() }));
            } else {
                eprintln!("registration rejected: {e}");
            }
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(e.into()),
    }
}

/// One stage submission as reported in traces and JSON output.
pub(crate) struct StageRecord {
    pub stage: Stage,
    pub input_field: &'static str,
    pub result: StageResult,
}

pub(crate) fn record_stage(
    trace: &mut Vec<StageRecord>,
    stage_before: Stage,
    input_field: &'static str,
    result: StageResult,
) -> bool {
    trace.push(StageRecord {
        stage: stage_before,
        input_field,
        result,
    });
    result.outcome == Outcome::Advance
}

/// Runs the honest three-step flow, stopping at the first rejection.
pub(crate) fn run_flow(
    key: &MasterKey,
    store: &Store,
    session: &mut Session,
    login_name: &str,
    login_password: &str,
) -> Vec<StageRecord> {
    let mut trace = Vec::new();
    let before = session.stage();
    let result = session.submit_login_name(key, store, login_name);
    if !record_stage(&mut trace, before, "login_name", result) {
        return trace;
    }
    let before = session.stage();
    let result = session.submit_login_password(key, store, login_password);
    if !record_stage(&mut trace, before, "login_password", result) {
        return trace;
    }
    let before = session.stage();
    let result = session.finalize(key, store);
    record_stage(&mut trace, before, "authentication_password", result);
    trace
}

pub(crate) fn trace_json(trace: &[StageRecord], session: &Session) -> serde_json::Value {
    json!({
        "stage_results": trace
            .iter()
            .map(|r| {
                json!({
                    "stage": r.stage.to_string(),
                    "input_field": r.input_field,
                    "outcome": match r.result.outcome {
                        Outcome::Advance => "Advance",
                        Outcome::Reject => "Reject",
                    },
                    "new_stage": r.result.new_stage.to_string(),
                })
            })
            .collect::<Vec<_>>(),
        "final_state": session.stage().to_string(),
        "reject_reason": session.reject_reason().map(|r| r.to_string()),
    })
}

pub(crate) fn print_trace(trace: &[StageRecord], session: &Session) {
    for r in trace {
        match r.result.outcome {
            Outcome::Advance => {
                println!("stage {}: {} accepted -> {}", r.stage, r.input_field, r.result.new_stage)
            }
            Outcome::Reject => println!(
                "stage {}: {} rejected ({})",
                r.stage,
                r.input_field,
                session
                    .reject_reason()
                    .map(|x| x.to_string())
                    .unwrap_or_else(|| "terminal session".into())
            ),
        }
    }
    match session.reject_reason() {
        Some(reason) if session.stage() == Stage::Rejected => {
            println!("result: Rejected ({reason})")
        }
        _ => println!("result: {}", session.stage()),
    }
}

fn cmd_login(
    cli: &Cli,
    key: &MasterKey,
    rng: &mut ChaCha20Rng,
    login_name: &str,
    login_password: &str,
) -> Result<ExitCode> {
    let device = load_device(&cli.device)?;
    let store = Store::open(&cli.store)?;
    let mut session = Session::begin_with_idle_limit(rng, device, idle_limit(cli));
    let trace = run_flow(key, &store, &mut session, login_name, login_password);

    if cli.json {
        println!("{}", trace_json(&trace, &session));
    } else {
        print_trace(&trace, &session);
    }
    Ok(if session.stage() == Stage::Granted {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_inspect_converter(
    cli: &Cli,
    key: &MasterKey,
    kind: KindArg,
    credential: &str,
    nonce_hex: &str,
    attempt: u32,
    unsafe_ok: bool,
) -> Result<ExitCode> {
    if !unsafe_ok {
        bail!("inspect-converter prints secret material; pass --unsafe to confirm");
    }
    let device = load_device(&cli.device)?;
    let nonce: [u8; 16] = hex::decode(nonce_hex)
        .ok()
        .and_then(|v| v.try_into().ok())
        .context("--nonce must be 32 hex characters")?;

    let kind: ConverterKind = kind.into();
    let credential = match kind {
        ConverterKind::Ln => trident_core::normalize_login_name(credential)?,
        ConverterKind::Lp => {
            trident_core::validate_login_password(credential)?;
            credential.to_string()
        }
    };
    let matrix = build_matrix(key, &nonce, kind, &credential, device.imei(), device.imsi(), attempt)?;
    let ap = (kind == ConverterKind::Lp).then(|| assemble_ap(&matrix));

    if cli.json {
        let rows: Vec<_> = matrix
            .rows
            .iter()
            .map(|r| {
                json!({
                    "input_char": r.input_char.to_string(),
                    "digit": r.digit,
                    "converted": r.converted,
                    "label": r.label.map(|l| l.to_string()),
                })
            })
            .collect();
        let mut doc = json!({
            "kind": kind.to_string(),
            "credential": credential,
            "nonce": nonce_hex,
            "attempt": attempt,
            "rows": rows,
        });
        if let Some(ap) = &ap {
            let profile = classify(ap).expect("APs are printable ASCII");
            doc["ap"] = json!(ap);
            doc["ap_classes"] = json!({
                "has_upper": profile.has_upper,
                "has_lower": profile.has_lower,
                "has_digit": profile.has_digit,
                "has_symbol": profile.has_symbol,
                "passes_policy": trident_core::check_ap_policy(ap),
            });
        }
        println!("{doc}");
    } else {
        println!("DEBUG — reveals secrets");
        println!("{kind} converter for {credential:?} (nonce {nonce_hex}, attempt {attempt})");
        println!();
        let head = match kind {
            ConverterKind::Ln => "Username",
            ConverterKind::Lp => "Login Password",
        };
        let width = matrix.rows.iter().map(|r| r.converted.len()).max().unwrap_or(16).max(16);
        println!("  {head:<14} | Character Digit | {:<w$} | Shuffling Label", "Converted String", w = width);
        println!("  {:-<14}-+-----------------+-{:-<w$}-+----------------", "", "", w = width);
        for r in &matrix.rows {
            println!(
                "  {:<14} | {:<15} | {:<w$} | {}",
                r.input_char,
                r.digit,
                r.converted,
                r.label.map(|l| l.to_string()).unwrap_or_default(),
                w = width
            );
        }
        if let Some(ap) = &ap {
            let profile = classify(ap).expect("APs are printable ASCII");
            println!();
            println!("  digit sum: {}", matrix.digit_sum());
            println!("  authentication password: {ap}");
            println!(
                "  classes: upper={} lower={} digit={} symbol={}  policy={}",
                profile.has_upper,
                profile.has_lower,
                profile.has_digit,
                profile.has_symbol,
                if trident_core::check_ap_policy(ap) { "pass" } else { "fail" }
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
