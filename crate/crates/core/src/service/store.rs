//! Per-session directories of canonical files:
//!
//! ```text
//! <root>/sessions/<id>/session.json
//! <root>/sessions/<id>/revisions/<n>.docspec.json
//! <root>/sessions/<id>/document.html
//! <root>/sessions/<id>/units.json
//! <root>/sessions/<id>/evaluation.json
//! <root>/sessions/<id>/transcript.jsonl
//! ```
//!
//! Every write goes to a temporary file that is then renamed into place, so a
//! crash leaves either the old or the new contents.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::docspec::{parse_docspec, serialize_docspec, DocSpec};

use super::model::Session;

pub const SESSION_FILE: &str = "session.json";
pub const DOCUMENT_FILE: &str = "document.html";
pub const UNITS_FILE: &str = "units.json";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("store i/o on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupt store file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` via a synced temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("store paths have a parent");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path.file_name().expect("store paths name a file").to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub struct Store {
    root: PathBuf,
    next_id: Mutex<u64>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Store {
    pub fn open(root: &Path) -> Result<Store, StoreError> {
        let sessions = root.join("sessions");
        fs::create_dir_all(&sessions).map_err(io_err(&sessions))?;
        let mut max = 0;
        for entry in fs::read_dir(&sessions).map_err(io_err(&sessions))? {
            let entry = entry.map_err(io_err(&sessions))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(n) = name.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                max = max.max(n);
            }
        }
        Ok(Store {
            root: root.to_path_buf(),
            next_id: Mutex::new(max + 1),
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn allocate_id(&self) -> String {
        let mut next = self.next_id.lock().expect("id lock");
        let id = format!("s{:06}", *next);
        *next += 1;
        id
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(id)
    }

    /// The writer lock for one session. Hold it across load-modify-save.
    pub fn lock(&self, id: &str) -> Arc<Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    pub fn exists(&self, id: &str) -> bool {
        is_session_id(id) && self.session_dir(id).join(SESSION_FILE).is_file()
    }

    pub fn load(&self, id: &str) -> Result<Session, StoreError> {
        if !is_session_id(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let path = self.session_dir(id).join(SESSION_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(e) => return Err(io_err(&path)(e)),
        };
        serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            path,
            message: e.to_string(),
        })
    }

    pub fn save(&self, session: &Session) -> Result<(), StoreError> {
        let mut text = serde_json::to_string_pretty(session).expect("session serializes");
        text.push('\n');
        write_atomic(&self.session_dir(&session.id).join(SESSION_FILE), text.as_bytes())
    }

    /// All sessions, ordered by id.
    pub fn list(&self) -> Result<Vec<Session>, StoreError> {
        let sessions = self.root.join("sessions");
        let mut ids: Vec<String> = fs::read_dir(&sessions)
            .map_err(io_err(&sessions))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| is_session_id(n))
            .collect();
        ids.sort();
        let mut out = Vec::new();
        for id in ids {
            match self.load(&id) {
                Ok(s) => out.push(s),
                Err(StoreError::NotFound(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    fn revision_path(&self, id: &str, revision: u64) -> PathBuf {
        self.session_dir(id).join("revisions").join(format!("{revision:04}.docspec.json"))
    }

    /// Stores a revision body. Existing revisions are never overwritten.
    pub fn write_revision(&self, id: &str, revision: u64, spec: &DocSpec) -> Result<(), StoreError> {
        let path = self.revision_path(id, revision);
        if path.exists() {
            return Err(StoreError::Corrupt {
                path,
                message: "revision already exists".into(),
            });
        }
        write_atomic(&path, serialize_docspec(spec).as_bytes())
    }

    pub fn read_revision(&self, id: &str, revision: u64) -> Result<DocSpec, StoreError> {
        let path = self.revision_path(id, revision);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        parse_docspec(&text).map_err(|r| StoreError::Corrupt {
            path,
            message: r.to_string(),
        })
    }

    pub fn write_file(&self, id: &str, name: &str, bytes: &[u8]) -> Result<(), StoreError> {
        write_atomic(&self.session_dir(id).join(name), bytes)
    }

    pub fn read_file(&self, id: &str, name: &str) -> Result<Option<Vec<u8>>, StoreError> {
        let path = self.session_dir(id).join(name);
        match fs::read(&path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

/// Session ids are `s` followed by digits; anything else never touches disk.
pub fn is_session_id(id: &str) -> bool {
    id.len() > 1 && id.starts_with('s') && id[1..].bytes().all(|b| b.is_ascii_digit())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docspec::test_support::pi_spec;
    use crate::service::model::now;

    fn session(id: &str) -> Session {
        Session {
            id: id.into(),
            topic: "t".into(),
            created_at: now(),
            updated_at: now(),
            revisions: vec![],
            job: None,
            jobs_started: 0,
            document: None,
            evaluation: None,
            chat: vec![],
        }
    }

    #[test]
    fn ids_continue_after_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let a = store.allocate_id();
        store.save(&session(&a)).unwrap();
        let b = store.allocate_id();
        assert_ne!(a, b);
        let reopened = Store::open(dir.path()).unwrap();
        assert_eq!(reopened.allocate_id(), "s000002");
    }

    #[test]
    fn revisions_are_write_once() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.save(&session("s000001")).unwrap();
        store.write_revision("s000001", 1, &pi_spec()).unwrap();
        assert!(store.write_revision("s000001", 1, &pi_spec()).is_err());
        assert_eq!(store.read_revision("s000001", 1).unwrap(), pi_spec());
    }

    #[test]
    fn rejects_path_like_ids() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert!(matches!(store.load("../x"), Err(StoreError::NotFound(_))));
        assert!(!is_session_id("s"));
        assert!(is_session_id("s000123"));
    }
}
