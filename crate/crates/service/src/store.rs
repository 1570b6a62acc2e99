//! Directory-backed session store.
//!
//! ```text
//! <root>/<session_id>/manifest.json
//!                    /<task>.<wav|ljsonl>
//!                    /report.json
//! ```
//!
//! Every file is replaced atomically (temp file in the same directory, then
//! rename), so readers always see a complete previous or next version.
//! Writers to one session are serialized by a per-session lock.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use park_core::{SessionId, SessionManifest, SessionStatus, TaskKind};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session store unavailable: {0}")]
    Unavailable(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("session is {0:?} and no longer accepts uploads")]
    Closed(SessionStatus),
    #[error("corrupt session data: {0}")]
    Corrupt(String),
}

fn unavailable(e: impl std::fmt::Display) -> StoreError {
    StoreError::Unavailable(e.to_string())
}

/// Writes `bytes` to `path` via a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn artifact_file_name(task: TaskKind) -> String {
    format!("{}.{}", task, task.artifact_extension())
}

pub fn read_manifest(dir: &Path) -> Result<SessionManifest, StoreError> {
    let bytes = std::fs::read(dir.join(MANIFEST_FILE)).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => StoreError::UnknownSession(dir.display().to_string()),
        _ => unavailable(e),
    })?;
    serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt(e.to_string()))
}

pub fn write_manifest(dir: &Path, m: &SessionManifest) -> Result<(), StoreError> {
    let json = serde_json::to_vec_pretty(m).expect("manifest serializes");
    write_atomic(&dir.join(MANIFEST_FILE), &json).map_err(unavailable)
}

pub struct SessionStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl SessionStore {
    /// Does not touch the disk; see [`SessionStore::ensure_root`].
    pub fn new(root: impl Into<PathBuf>) -> Self {
        SessionStore { root: root.into(), locks: Mutex::new(HashMap::new()) }
    }

    pub fn ensure_root(&self) -> Result<(), StoreError> {
        std::fs::create_dir_all(&self.root).map_err(unavailable)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, id: &SessionId) -> PathBuf {
        self.root.join(id.as_str())
    }

    /// Runs `f` holding the session's write lock.
    pub fn with_lock<T>(&self, id: &SessionId, f: impl FnOnce() -> T) -> T {
        let lock = {
            let mut map = self.locks.lock().unwrap_or_else(|p| p.into_inner());
            map.entry(id.as_str().to_string()).or_default().clone()
        };
        let _guard = lock.lock().unwrap_or_else(|p| p.into_inner());
        f()
    }

    pub fn create(
        &self,
        participant: Option<String>,
        region_code: Option<String>,
        now: DateTime<Utc>,
    ) -> Result<SessionManifest, StoreError> {
        let id = SessionId::generate();
        let dir = self.session_dir(&id);
        std::fs::create_dir_all(&self.root).map_err(unavailable)?;
        std::fs::create_dir(&dir).map_err(unavailable)?;
        let mut m = SessionManifest::new(id, now);
        m.participant = participant;
        m.region_code = region_code;
        write_manifest(&dir, &m)?;
        Ok(m)
    }

    pub fn manifest(&self, id: &SessionId) -> Result<SessionManifest, StoreError> {
        if !self.root.is_dir() {
            return Err(StoreError::Unavailable(format!("{} is not a directory", self.root.display())));
        }
        read_manifest(&self.session_dir(id)).map_err(|e| match e {
            StoreError::UnknownSession(_) => StoreError::UnknownSession(id.to_string()),
            other => other,
        })
    }

    /// Stores (or replaces) the artifact of `task`. The caller validates
    /// the bytes first.
    pub fn put_artifact(
        &self,
        id: &SessionId,
        task: TaskKind,
        bytes: &[u8],
        now: DateTime<Utc>,
    ) -> Result<SessionManifest, StoreError> {
        self.with_lock(id, || {
            let mut m = self.manifest(id)?;
            if m.status != SessionStatus::Collecting {
                return Err(StoreError::Closed(m.status));
            }
            let dir = self.session_dir(id);
            let name = artifact_file_name(task);
            write_atomic(&dir.join(&name), bytes).map_err(unavailable)?;
            m.artifacts.insert(task, name);
            m.updated_at = now;
            write_manifest(&dir, &m)?;
            Ok(m)
        })
    }

    /// Stored report bytes, if the session has been analyzed.
    pub fn report(&self, id: &SessionId) -> Result<Option<Vec<u8>>, StoreError> {
        self.manifest(id)?;
        match std::fs::read(self.session_dir(id).join(REPORT_FILE)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(unavailable(e)),
        }
    }
}
