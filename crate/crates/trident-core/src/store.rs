//! File-backed credential database.
//!
//! One JSON document, strict schema, binary fields as lowercase hex.
//! Writes replace the whole file atomically: serialize to a temp file in
//! the same directory, fsync, rename over the original. A sidecar advisory
//! lock covers the write+rename window so concurrent writers serialize.
//! Parsing is version-gated and rejects unknown fields.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use fs2::FileExt;
use serde::{Deserialize, Serialize};

use crate::authsvc::AccountRecord;
use crate::error::{Error, Result};
use crate::identity::IdentityKind;

const STORE_VERSION: u32 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StoreFile {
    version: u32,
    records: Vec<AccountRecord>,
}

#[derive(Serialize)]
struct StoreFileRef<'a> {
    version: u32,
    records: &'a [AccountRecord],
}

/// In-memory index over the account records, optionally bound to a file.
pub struct Store {
    path: Option<PathBuf>,
    records: Vec<AccountRecord>,
    by_ln_digest: HashMap<[u8; 32], usize>,
    by_account_id: HashMap<[u8; 16], usize>,
    #[cfg(test)]
    crash_after_temp_write: bool,
}

impl Store {
    fn empty(path: Option<PathBuf>) -> Store {
        Store {
            path,
            records: Vec::new(),
            by_ln_digest: HashMap::new(),
            by_account_id: HashMap::new(),
            #[cfg(test)]
            crash_after_temp_write: false,
        }
    }

    /// Opens a store file, or starts a new one if the path does not exist.
    pub fn open(path: impl Into<PathBuf>) -> Result<Store> {
        let path = path.into();
        if !path.exists() {
            return Ok(Store::empty(Some(path)));
        }
        let raw = fs::read_to_string(&path)?;
        let file: StoreFile = serde_json::from_str(&raw).map_err(|e| Error::CorruptStore {
            reason: e.to_string(),
        })?;
        if file.version != STORE_VERSION {
            return Err(Error::CorruptStore {
                reason: format!("unknown version {}", file.version),
            });
        }
        let mut store = Store::empty(Some(path));
        for record in file.records {
            validate_record(&record)?;
            store.index(record).map_err(|_| Error::CorruptStore {
                reason: "duplicate ln_identity digest".into(),
            })?;
        }
        Ok(store)
    }

    /// A store with no backing file; puts update only the in-memory index.
    pub fn in_memory() -> Store {
        Store::empty(None)
    }

    fn index(&mut self, record: AccountRecord) -> Result<()> {
        if self.by_ln_digest.contains_key(&record.ln_identity.digest) {
            return Err(Error::DuplicateIdentity);
        }
        let idx = self.records.len();
        self.by_ln_digest.insert(record.ln_identity.digest, idx);
        self.by_account_id.insert(record.account_id, idx);
        self.records.push(record);
        Ok(())
    }

    /// Adds a record and, for file-backed stores, persists atomically.
    pub fn put_account(&mut self, record: AccountRecord) -> Result<()> {
        self.index(record)?;
        if self.path.is_some() {
            self.persist()
        } else {
            Ok(())
        }
    }

    pub fn get_by_ln_digest(&self, digest: &[u8; 32]) -> Option<&AccountRecord> {
        self.by_ln_digest.get(digest).map(|&i| &self.records[i])
    }

    pub fn get_by_account_id(&self, account_id: &[u8; 16]) -> Option<&AccountRecord> {
        self.by_account_id.get(account_id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[AccountRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Serializes the current state (used for snapshots of in-memory stores
    /// as well as the internal persist path).
    pub fn persist_to(&self, path: &Path) -> Result<()> {
        let doc = StoreFileRef {
            version: STORE_VERSION,
            records: &self.records,
        };
        let bytes = serde_json::to_vec_pretty(&doc).map_err(|e| Error::CorruptStore {
            reason: e.to_string(),
        })?;
        self.write_atomic(path, &bytes)
    }

    fn persist(&self) -> Result<()> {
        let path = self.path.as_ref().expect("persist requires a backing file");
        self.persist_to(path)
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        // Exclusive advisory lock for the write+rename window.
        let lock_path = sibling(path, ".lock");
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)?;
        lock.lock_exclusive()?;

        let tmp_path = sibling(path, ".tmp");
        let result = (|| -> Result<()> {
            let mut tmp = File::create(&tmp_path)?;
            tmp.write_all(bytes)?;
            tmp.sync_all()?;
            #[cfg(test)]
            if self.crash_after_temp_write {
                return Err(Error::Io(std::io::Error::other("simulated crash before rename")));
            }
            fs::rename(&tmp_path, path)?;
            Ok(())
        })();

        let _ = lock.unlock();
        result
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn validate_record(record: &AccountRecord) -> Result<()> {
    let corrupt = |reason: String| Error::CorruptStore { reason };
    if record.ln_identity.kind != IdentityKind::Ln
        || record.lp_identity.kind != IdentityKind::Lp
        || record.ap_identity.kind != IdentityKind::Ap
    {
        return Err(corrupt("identity kind does not match its slot".into()));
    }
    record
        .ln_descriptor
        .validate()
        .map_err(|e| corrupt(format!("ln_descriptor: {e}")))?;
    record
        .lp_descriptor
        .validate()
        .map_err(|e| corrupt(format!("lp_descriptor: {e}")))?;
    Ok(())
}
