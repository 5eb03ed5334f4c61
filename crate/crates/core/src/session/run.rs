use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::{Clock, ExperimentConfig, Session, SessionError, Stage};
use crate::dataset::{render_demographics, render_session_table, Cohort, CohortMember, IngestError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("subject {0} already has a session")]
    DuplicateSubject(String),
    #[error("run is closed")]
    Closed,
    #[error("run is full ({0} sessions)")]
    Full(usize),
    #[error("no session for subject {0}")]
    UnknownSubject(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// All sessions of one lab run, sharing a configuration.
#[derive(Debug, Clone)]
pub struct Run {
    pub label: String,
    config: Arc<ExperimentConfig>,
    sessions: BTreeMap<String, Session>,
    pub capacity: Option<usize>,
    pub closed: bool,
    pub clock: Clock,
}

impl Run {
    pub fn new(label: &str, config: ExperimentConfig) -> Result<Self, RunError> {
        config.validate()?;
        Ok(Run {
            label: label.to_string(),
            config: Arc::new(config),
            sessions: BTreeMap::new(),
            capacity: None,
            closed: false,
            clock: Clock::System,
        })
    }

    pub fn config(&self) -> &Arc<ExperimentConfig> {
        &self.config
    }

    pub fn create_session(&mut self, subject_id: &str) -> Result<&mut Session, RunError> {
        if self.closed {
            return Err(RunError::Closed);
        }
        if self.sessions.contains_key(subject_id) {
            return Err(RunError::DuplicateSubject(subject_id.to_string()));
        }
        if let Some(cap) = self.capacity {
            if self.sessions.len() >= cap {
                return Err(RunError::Full(cap));
            }
        }
        let s = Session::create_with_clock(self.config.clone(), subject_id, self.clock)?;
        Ok(self.sessions.entry(subject_id.to_string()).or_insert(s))
    }

    /// Adds a session rebuilt from its event log.
    pub fn restore(&mut self, session: Session) -> Result<(), RunError> {
        let id = session.subject_id().to_string();
        if self.sessions.contains_key(&id) {
            return Err(RunError::DuplicateSubject(id));
        }
        self.sessions.insert(id, session);
        Ok(())
    }

    pub fn session(&self, subject_id: &str) -> Result<&Session, RunError> {
        self.sessions.get(subject_id).ok_or_else(|| RunError::UnknownSubject(subject_id.to_string()))
    }

    pub fn session_mut(&mut self, subject_id: &str) -> Result<&mut Session, RunError> {
        self.sessions.get_mut(subject_id).ok_or_else(|| RunError::UnknownSubject(subject_id.to_string()))
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    /// Cohort of every PAID session, in subject id order.
    pub fn paid_cohort(&self) -> Result<Cohort, RunError> {
        let members = self
            .sessions
            .values()
            .filter(|s| s.state().stage == Stage::Paid)
            .filter_map(|s| {
                Some(CohortMember {
                    subject: s.subject_record(&self.label)?,
                    demographics: s.state().questionnaire.clone(),
                })
            })
            .collect();
        Ok(Cohort::from_members(members)?)
    }

    /// Session table and demographics file for the PAID sessions.
    pub fn export_cohort(&self) -> Result<(String, String), RunError> {
        let cohort = self.paid_cohort()?;
        let records: Vec<_> = cohort.subjects().cloned().collect();
        let demo: Vec<_> = cohort
            .members()
            .iter()
            .filter_map(|m| Some((m.subject.subject_id.clone(), m.demographics.clone()?)))
            .collect();
        Ok((render_session_table(Some(&self.label), &records), render_demographics(&demo)))
    }
}
