//! Python bindings for the triple-identity authentication core.
//!
//! Exposes the converter, policy checks, and the registration/login flow as
//! a `trident_py` extension module so Python drives the scheme in-process:
//!
//!     import trident_py as t
//!     key = t.MasterKey("ab" * 32)
//!     device = t.DeviceProfile("490154203237518", "310150123456789", "+15550100123")
//!     store = t.Store.in_memory()
//!     store.register(key, device, "Benz428", "dp7a3k", seed=7)
//!     session = t.begin_session(device)
//!     session.submit_login_name(key, store, "benz428")

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use trident_core as core;
use trident_core::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn make_rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn parse_nonce(hex_str: &str) -> PyResult<[u8; 16]> {
    hex::decode(hex_str)
        .ok()
        .and_then(|v| v.try_into().ok())
        .ok_or_else(|| PyValueError::new_err("nonce must be 32 hex characters"))
}

fn parse_kind(kind: &str) -> PyResult<core::ConverterKind> {
    match kind {
        "LN" => Ok(core::ConverterKind::Ln),
        "LP" => Ok(core::ConverterKind::Lp),
        other => Err(PyValueError::new_err(format!(
            "kind must be \"LN\" or \"LP\", got {other:?}"
        ))),
    }
}

/// Server-side master secret, from 64 hex characters.
#[pyclass(name = "MasterKey", frozen)]
struct PyMasterKey {
    inner: core::MasterKey,
}

#[pymethods]
impl PyMasterKey {
    #[new]
    fn new(hex_key: &str) -> PyResult<Self> {
        Ok(PyMasterKey {
            inner: core::MasterKey::from_hex(hex_key).map_err(to_py_err)?,
        })
    }

    fn __repr__(&self) -> &'static str {
        "MasterKey(..)"
    }
}

/// Simulated smartphone: 15-digit IMEI and IMSI plus a phone number.
#[pyclass(name = "DeviceProfile", frozen)]
struct PyDeviceProfile {
    inner: core::DeviceProfile,
}

#[pymethods]
impl PyDeviceProfile {
    #[new]
    fn new(imei: &str, imsi: &str, phone_number: &str) -> PyResult<Self> {
        Ok(PyDeviceProfile {
            inner: core::DeviceProfile::new(imei, imsi, phone_number).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn imei(&self) -> String {
        self.inner.imei().to_string()
    }

    #[getter]
    fn imsi(&self) -> String {
        self.inner.imsi().to_string()
    }

    #[getter]
    fn phone_number(&self) -> String {
        self.inner.phone_number().to_string()
    }

    fn __repr__(&self) -> String {
        format!("DeviceProfile(imei={}, imsi={})", self.inner.imei(), self.inner.imsi())
    }
}

/// A derived converter. Rows are `(input_char, digit, converted, label)`.
#[pyclass(name = "QuasiMatrix", frozen)]
struct PyQuasiMatrix {
    inner: core::QuasiMatrix,
}

#[pymethods]
impl PyQuasiMatrix {
    #[getter]
    fn kind(&self) -> String {
        self.inner.kind.to_string()
    }

    #[getter]
    fn attempt(&self) -> u32 {
        self.inner.attempt
    }

    fn digit_sum(&self) -> u32 {
        self.inner.digit_sum()
    }

    fn rows(&self) -> Vec<(String, u8, String, Option<String>)> {
        self.inner
            .rows
            .iter()
            .map(|r| {
                (
                    r.input_char.to_string(),
                    r.digit,
                    r.converted.clone(),
                    r.label.map(|l| l.to_string()),
                )
            })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "QuasiMatrix(kind={}, rows={}, attempt={})",
            self.inner.kind,
            self.inner.rows.len(),
            self.inner.attempt
        )
    }
}

/// Account database, in memory or file-backed.
#[pyclass(name = "Store")]
struct PyStore {
    inner: core::Store,
}

#[pymethods]
impl PyStore {
    #[staticmethod]
    fn in_memory() -> Self {
        PyStore {
            inner: core::Store::in_memory(),
        }
    }

    #[staticmethod]
    fn open(path: &str) -> PyResult<Self> {
        Ok(PyStore {
            inner: core::Store::open(path).map_err(to_py_err)?,
        })
    }

    /// Registers an account; returns the account id as hex.
    #[pyo3(signature = (key, device, login_name, login_password, seed=None))]
    fn register(
        &mut self,
        key: &PyMasterKey,
        device: &PyDeviceProfile,
        login_name: &str,
        login_password: &str,
        seed: Option<u64>,
    ) -> PyResult<String> {
        let mut rng = make_rng(seed);
        let record = core::register_account(
            &key.inner,
            &mut rng,
            &mut self.inner,
            &device.inner,
            login_name,
            login_password,
        )
        .map_err(to_py_err)?;
        Ok(hex::encode(record.account_id))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// One login attempt. Stage methods return `(outcome, new_stage)` strings.
#[pyclass(name = "Session")]
struct PySession {
    inner: core::Session,
}

fn stage_tuple(result: core::StageResult) -> (String, String) {
    let outcome = match result.outcome {
        core::Outcome::Advance => "Advance",
        core::Outcome::Reject => "Reject",
    };
    (outcome.to_string(), result.new_stage.to_string())
}

#[pymethods]
impl PySession {
    #[getter]
    fn stage(&self) -> String {
        self.inner.stage().to_string()
    }

    #[getter]
    fn reject_reason(&self) -> Option<String> {
        self.inner.reject_reason().map(|r| r.to_string())
    }

    #[getter]
    fn session_id(&self) -> String {
        hex::encode(self.inner.session_id())
    }

    fn submit_login_name(
        &mut self,
        key: &PyMasterKey,
        store: &PyStore,
        input: &str,
    ) -> (String, String) {
        stage_tuple(self.inner.submit_login_name(&key.inner, &store.inner, input))
    }

    fn submit_login_password(
        &mut self,
        key: &PyMasterKey,
        store: &PyStore,
        input: &str,
    ) -> (String, String) {
        stage_tuple(self.inner.submit_login_password(&key.inner, &store.inner, input))
    }

    fn finalize(&mut self, key: &PyMasterKey, store: &PyStore) -> (String, String) {
        stage_tuple(self.inner.finalize(&key.inner, &store.inner))
    }

    fn __repr__(&self) -> String {
        format!("Session(stage={})", self.inner.stage())
    }
}

/// Starts a login session for a device at stage AwaitLN.
#[pyfunction]
#[pyo3(signature = (device, seed=None))]
fn begin_session(device: &PyDeviceProfile, seed: Option<u64>) -> PySession {
    let mut rng = make_rng(seed);
    PySession {
        inner: core::Session::begin(&mut rng, device.inner.clone()),
    }
}

/// Lowercases and strips a raw login name; raises ValueError outside 5-15 chars.
#[pyfunction]
fn normalize_login_name(raw: &str) -> PyResult<String> {
    core::normalize_login_name(raw).map_err(to_py_err)
}

/// Raises ValueError unless the password is 5-15 chars of [a-z0-9].
#[pyfunction]
fn validate_login_password(pw: &str) -> PyResult<()> {
    core::validate_login_password(pw).map_err(to_py_err)
}

/// True iff the 20-char, 4-class, upper-or-symbol-head policy holds.
#[pyfunction]
fn check_ap_policy(ap: &str) -> bool {
    core::check_ap_policy(ap)
}

/// Field gate: `field` is "LN" or "LP".
#[pyfunction]
fn field_accepts(field: &str, input: &str) -> PyResult<bool> {
    let kind = match field {
        "LN" => core::FieldKind::LnField,
        "LP" => core::FieldKind::LpField,
        other => {
            return Err(PyValueError::new_err(format!(
                "field must be \"LN\" or \"LP\", got {other:?}"
            )))
        }
    };
    Ok(core::field_accepts(kind, input))
}

/// Character-class flags of a printable-ASCII string.
#[pyfunction]
fn classify<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let profile = core::classify(text).map_err(to_py_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("has_upper", profile.has_upper)?;
    dict.set_item("has_lower", profile.has_lower)?;
    dict.set_item("has_digit", profile.has_digit)?;
    dict.set_item("has_symbol", profile.has_symbol)?;
    dict.set_item("class_count", profile.class_count())?;
    Ok(dict)
}

/// Derives a converter for the exact (nonce, attempt); the credential must
/// already satisfy the policy for its kind.
#[pyfunction]
#[pyo3(signature = (key, nonce_hex, kind, credential, imei, imsi, attempt=0))]
#[allow(clippy::too_many_arguments)]
fn build_matrix(
    key: &PyMasterKey,
    nonce_hex: &str,
    kind: &str,
    credential: &str,
    imei: &str,
    imsi: &str,
    attempt: u32,
) -> PyResult<PyQuasiMatrix> {
    let nonce = parse_nonce(nonce_hex)?;
    let kind = parse_kind(kind)?;
    Ok(PyQuasiMatrix {
        inner: core::build_matrix(&key.inner, &nonce, kind, credential, imei, imsi, attempt)
            .map_err(to_py_err)?,
    })
}

/// Shuffles an LP matrix's rows into the 20-character buffer.
#[pyfunction]
fn assemble_ap(matrix: &PyQuasiMatrix) -> String {
    core::assemble_ap(&matrix.inner)
}

/// Derives the LP converter and policy-passing authentication password.
#[pyfunction]
fn generate_ap(
    key: &PyMasterKey,
    nonce_hex: &str,
    credential: &str,
    imei: &str,
    imsi: &str,
) -> PyResult<(PyQuasiMatrix, String)> {
    let nonce = parse_nonce(nonce_hex)?;
    let (matrix, ap) =
        core::generate_ap(&key.inner, &nonce, credential, imei, imsi).map_err(to_py_err)?;
    Ok((PyQuasiMatrix { inner: matrix }, ap.as_str().to_string()))
}

#[pymodule]
fn trident_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("AP_LEN", core::AP_LEN)?;
    m.add_class::<PyMasterKey>()?;
    m.add_class::<PyDeviceProfile>()?;
    m.add_class::<PyQuasiMatrix>()?;
    m.add_class::<PyStore>()?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(begin_session, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_login_name, m)?)?;
    m.add_function(wrap_pyfunction!(validate_login_password, m)?)?;
    m.add_function(wrap_pyfunction!(check_ap_policy, m)?)?;
    m.add_function(wrap_pyfunction!(field_accepts, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(build_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(assemble_ap, m)?)?;
    m.add_function(wrap_pyfunction!(generate_ap, m)?)?;
    Ok(())
}
