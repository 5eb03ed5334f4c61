//! In-memory registry of live sessions backed by the [`Store`].
//!
//! Each session sits behind its own mutex, so mutations of one session are
//! serialized while different sessions proceed in parallel.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};

use sha2::{Digest, Sha256};

use mplab_core::session::{Clock, ExperimentConfig, Run, RunError, Session};

use crate::config::{ConfigError, ServerConfig};
use crate::content::Content;
use crate::error::ApiError;
use crate::store::{IdempotentReply, RunMeta, SessionMeta, Store, StoreError};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Two v4 UUIDs: 244 random bits.
pub fn new_token() -> String {
    format!("{}{}", uuid::Uuid::new_v4().simple(), uuid::Uuid::new_v4().simple())
}

#[derive(Debug)]
pub struct Slot {
    pub meta: SessionMeta,
    pub session: Session,
    /// Events already written to the store.
    persisted: usize,
    pub replies: HashMap<String, IdempotentReply>,
}

pub type SlotRef = Arc<Mutex<Slot>>;

#[derive(Debug, Default)]
pub struct Registry {
    pub closed: bool,
    pub sessions: BTreeMap<String, SlotRef>,
    pub by_subject: BTreeMap<String, String>,
    /// Token hash to session id.
    pub by_token: HashMap<String, String>,
}

#[derive(Debug)]
pub struct AppState {
    pub label: String,
    pub capacity: Option<usize>,
    pub clock: Clock,
    pub experiment: Arc<ExperimentConfig>,
    pub content: Content,
    pub store: Store,
    experimenter_sha256: String,
    pub registry: RwLock<Registry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Role {
    Subject(String),
    Experimenter,
}

pub struct Created {
    pub session_id: String,
    pub token: String,
    pub slot: SlotRef,
}

impl AppState {
    /// Builds the state and restores every stored session.
    pub fn new(cfg: &ServerConfig, experimenter_token: &str) -> Result<Self, crate::ServerError> {
        let content = match &cfg.content_file {
            Some(p) => Content::load(p)?,
            None => Content::default(),
        };
        let experiment = Arc::new(cfg.experiment()?);
        let store = Store::open(cfg.data_dir.as_deref())?;
        let clock = if cfg.run.logical_clock { Clock::Logical } else { Clock::System };
        let mut reg = Registry { closed: store.load_run()?.closed, ..Registry::default() };
        for stored in store.load_all()? {
            let mut session = Session::replay(experiment.clone(), &stored.events)
                .map_err(|source| StoreError::Log { path: stored.meta.session_id.clone().into(), source })?;
            session.set_clock(clock);
            if session.subject_id() != stored.meta.subject_id {
                return Err(ConfigError::Experiment(format!(
                    "session {} log names another subject",
                    stored.meta.session_id
                ))
                .into());
            }
            let persisted = session.events().len();
            let replies = stored.replies.into_iter().map(|r| (r.key.clone(), r)).collect();
            reg.by_subject.insert(stored.meta.subject_id.clone(), stored.meta.session_id.clone());
            reg.by_token.insert(stored.meta.token_sha256.clone(), stored.meta.session_id.clone());
            let id = stored.meta.session_id.clone();
            reg.sessions.insert(id, Arc::new(Mutex::new(Slot { meta: stored.meta, session, persisted, replies })));
        }
        Ok(AppState {
            label: cfg.run.label.clone(),
            capacity: cfg.run.capacity,
            clock,
            experiment,
            content,
            store,
            experimenter_sha256: sha256_hex(experimenter_token.as_bytes()),
            registry: RwLock::new(reg),
        })
    }

    pub fn authenticate(&self, token: Option<&str>) -> Result<Role, ApiError> {
        let token = token.ok_or(ApiError::Unauthorized)?;
        let h = sha256_hex(token.as_bytes());
        if h == self.experimenter_sha256 {
            return Ok(Role::Experimenter);
        }
        let reg = self.registry.read().expect("registry lock");
        reg.by_token.get(&h).map(|id| Role::Subject(id.clone())).ok_or(ApiError::Unauthorized)
    }

    pub fn slot(&self, session_id: &str) -> Result<SlotRef, ApiError> {
        self.registry
            .read()
            .expect("registry lock")
            .sessions
            .get(session_id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("session {session_id}")))
    }

    pub fn create_session(&self, subject_id: &str) -> Result<Created, ApiError> {
        let mut reg = self.registry.write().expect("registry lock");
        let run_err = |e: RunError| ApiError::run(e, &self.content);
        if reg.closed {
            return Err(run_err(RunError::Closed));
        }
        if reg.by_subject.contains_key(subject_id) {
            return Err(run_err(RunError::DuplicateSubject(subject_id.into())));
        }
        if let Some(cap) = self.capacity {
            if reg.sessions.len() >= cap {
                return Err(run_err(RunError::Full(cap)));
            }
        }
        let session = Session::create_with_clock(self.experiment.clone(), subject_id, self.clock)
            .map_err(|e| ApiError::session(e, &self.content))?;
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let token = new_token();
        let meta = SessionMeta {
            session_id: session_id.clone(),
            subject_id: subject_id.to_string(),
            token_sha256: sha256_hex(token.as_bytes()),
        };
        self.store.create(&meta)?;
        let mut slot = Slot { meta, session, persisted: 0, replies: HashMap::new() };
        slot.flush(&self.store)?;
        let slot = Arc::new(Mutex::new(slot));
        reg.by_token.insert(sha256_hex(token.as_bytes()), session_id.clone());
        reg.by_subject.insert(subject_id.to_string(), session_id.clone());
        reg.sessions.insert(session_id.clone(), slot.clone());
        Ok(Created { session_id, token, slot })
    }

    pub fn close_run(&self) -> Result<(), ApiError> {
        let mut reg = self.registry.write().expect("registry lock");
        self.store.save_run(&RunMeta { closed: true })?;
        reg.closed = true;
        Ok(())
    }

    /// Snapshot of the sessions as a core [`Run`], for export and analysis.
    pub fn snapshot_run(&self) -> Result<Run, ApiError> {
        let mut run = Run::new(&self.label, (*self.experiment).clone()).map_err(|e| ApiError::run(e, &self.content))?;
        for slot in self.registry.read().expect("registry lock").sessions.values() {
            let s = slot.lock().expect("slot lock").session.clone();
            run.restore(s).map_err(|e| ApiError::run(e, &self.content))?;
        }
        Ok(run)
    }
}

impl Slot {
    /// Writes events not yet in the store.
    pub fn flush(&mut self, store: &Store) -> Result<(), StoreError> {
        let events = self.session.events();
        store.append_events(&self.meta.session_id, &events[self.persisted..])?;
        self.persisted = events.len();
        Ok(())
    }
}
