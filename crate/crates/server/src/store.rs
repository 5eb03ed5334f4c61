//! Durable per-session storage: an append-only event log, a metadata file
//! and the replies already given to idempotent requests.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use mplab_core::session::{events_from_jsonl, events_to_jsonl, SessionError, SessionEvent};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Corrupt { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Log { path: PathBuf, source: SessionError },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub subject_id: String,
    /// Hex SHA-256 of the subject token.
    pub token_sha256: String,
}

/// Stored reply to a request carrying an idempotency key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdempotentReply {
    pub key: String,
    /// Hash of the request body; a reused key with another body is refused.
    pub request_sha256: String,
    pub status: u16,
    pub body: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMeta {
    pub closed: bool,
}

#[derive(Debug)]
pub struct StoredSession {
    pub meta: SessionMeta,
    pub events: Vec<SessionEvent>,
    pub replies: Vec<IdempotentReply>,
}

/// `None` root keeps nothing on disk.
#[derive(Debug, Clone)]
pub struct Store {
    root: Option<PathBuf>,
}

impl Store {
    pub fn open(root: Option<&Path>) -> Result<Self, StoreError> {
        if let Some(r) = root {
            let dir = r.join("sessions");
            std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        }
        Ok(Store { root: root.map(Path::to_path_buf) })
    }

    pub fn is_persistent(&self) -> bool {
        self.root.is_some()
    }

    fn path(&self, session_id: &str, ext: &str) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join("sessions").join(format!("{session_id}.{ext}")))
    }

    pub fn create(&self, meta: &SessionMeta) -> Result<(), StoreError> {
        if let Some(p) = self.path(&meta.session_id, "meta.json") {
            write_atomic(&p, &serde_json::to_vec_pretty(meta).expect("meta serializes"))?;
        }
        Ok(())
    }

    pub fn append_events(&self, session_id: &str, events: &[SessionEvent]) -> Result<(), StoreError> {
        match self.path(session_id, "events.jsonl") {
            Some(p) if !events.is_empty() => append(&p, events_to_jsonl(events).as_bytes()),
            _ => Ok(()),
        }
    }

    pub fn append_reply(&self, session_id: &str, reply: &IdempotentReply) -> Result<(), StoreError> {
        match self.path(session_id, "replies.jsonl") {
            Some(p) => append(&p, (serde_json::to_string(reply).expect("reply serializes") + "\n").as_bytes()),
            None => Ok(()),
        }
    }

    pub fn save_run(&self, meta: &RunMeta) -> Result<(), StoreError> {
        if let Some(r) = &self.root {
            write_atomic(&r.join("run.json"), &serde_json::to_vec(meta).expect("run meta serializes"))?;
        }
        Ok(())
    }

    pub fn load_run(&self) -> Result<RunMeta, StoreError> {
        let Some(r) = &self.root else { return Ok(RunMeta::default()) };
        let p = r.join("run.json");
        match std::fs::read(&p) {
            Ok(bytes) => {
                serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt { path: p, msg: e.to_string() })
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(RunMeta::default()),
            Err(e) => Err(io(&p)(e)),
        }
    }

    /// Every stored session, sorted by session id.
    pub fn load_all(&self) -> Result<Vec<StoredSession>, StoreError> {
        let Some(root) = &self.root else { return Ok(Vec::new()) };
        let dir = root.join("sessions");
        let mut ids: Vec<String> = std::fs::read_dir(&dir)
            .map_err(io(&dir))?
            .filter_map(|e| e.ok()?.file_name().into_string().ok()?.strip_suffix(".meta.json").map(str::to_string))
            .collect();
        ids.sort();
        ids.into_iter()
            .map(|id| {
                let mp = self.path(&id, "meta.json").expect("persistent");
                let meta: SessionMeta = serde_json::from_slice(&std::fs::read(&mp).map_err(io(&mp))?)
                    .map_err(|e| StoreError::Corrupt { path: mp.clone(), msg: e.to_string() })?;
                let ep = self.path(&id, "events.jsonl").expect("persistent");
                let events =
                    events_from_jsonl(&read_or_empty(&ep)?).map_err(|source| StoreError::Log { path: ep, source })?;
                let rp = self.path(&id, "replies.jsonl").expect("persistent");
                let replies = read_or_empty(&rp)?
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                    .map(|l| {
                        serde_json::from_str(l)
                            .map_err(|e| StoreError::Corrupt { path: rp.clone(), msg: e.to_string() })
                    })
                    .collect::<Result<_, _>>()?;
                Ok(StoredSession { meta, events, replies })
            })
            .collect()
    }
}

fn read_or_empty(p: &Path) -> Result<String, StoreError> {
    match std::fs::read_to_string(p) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(String::new()),
        Err(e) => Err(io(p)(e)),
    }
}

fn append(p: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let mut f = OpenOptions::new().create(true).append(true).open(p).map_err(io(p))?;
    f.write_all(bytes).map_err(io(p))?;
    f.sync_data().map_err(io(p))
}

fn write_atomic(p: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = p.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(io(&tmp))?;
    f.write_all(bytes).map_err(io(&tmp))?;
    f.sync_all().map_err(io(&tmp))?;
    std::fs::rename(&tmp, p).map_err(io(p))
}
