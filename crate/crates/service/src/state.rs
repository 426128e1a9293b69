use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use psa_core::voi::{EvppiResult, ParameterInputs};
use psa_core::{Analysis, Extensions};
use serde::Serialize;

use crate::error::ApiError;

pub fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// One analysis plus everything attached to it. Mutations replace the whole
/// value, so readers see either the old or the new state.
#[derive(Debug, Clone)]
pub struct Session {
    pub analysis: Analysis,
    pub extensions: Extensions,
    pub params: Option<ParameterInputs>,
    pub revision: u64,
    pub created: u64,
    pub updated: u64,
}

impl Session {
    pub fn new(analysis: Analysis, params: Option<ParameterInputs>) -> Self {
        let t = now();
        Session {
            analysis,
            extensions: Extensions::default(),
            params,
            revision: 1,
            created: t,
            updated: t,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum JobStatus {
    Running,
    Done { result: Box<EvppiResult> },
    Failed { error: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct Job {
    pub id: String,
    pub session: String,
    /// Session revision the job was computed against.
    pub revision: u64,
    #[serde(flatten)]
    pub status: JobStatus,
}

type Shared<T> = Arc<RwLock<T>>;

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Shared<HashMap<String, Shared<Session>>>,
    jobs: Shared<HashMap<String, Job>>,
}

fn poisoned<T>(_: T) -> ApiError {
    ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, "state lock poisoned")
}

impl AppState {
    pub fn insert(&self, session: Session) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.sessions
            .write()
            .expect("session map lock")
            .insert(id.clone(), Arc::new(RwLock::new(session)));
        id
    }

    fn handle(&self, id: &str) -> Result<Shared<Session>, ApiError> {
        self.sessions
            .read()
            .map_err(poisoned)?
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }

    /// Consistent copy of a session's current state.
    pub fn snapshot(&self, id: &str) -> Result<Session, ApiError> {
        let handle = self.handle(id)?;
        let guard = handle.read().map_err(poisoned)?;
        Ok(guard.clone())
    }

    /// Applies `f` to a copy of the session under its write lock and stores
    /// the result only if `f` succeeds. `expected` is the client's If-Match
    /// revision.
    pub fn mutate<F>(&self, id: &str, expected: Option<u64>, f: F) -> Result<Session, ApiError>
    where
        F: FnOnce(&Session) -> Result<Session, ApiError>,
    {
        let handle = self.handle(id)?;
        let mut guard = handle.write().map_err(poisoned)?;
        if let Some(rev) = expected {
            if rev != guard.revision {
                return Err(ApiError::conflict(rev, guard.revision));
            }
        }
        let mut next = f(&guard)?;
        next.revision = guard.revision + 1;
        next.updated = now();
        *guard = next.clone();
        Ok(next)
    }

    pub fn remove(&self, id: &str) -> Result<(), ApiError> {
        self.sessions
            .write()
            .map_err(poisoned)?
            .remove(id)
            .map(|_| ())
            .ok_or_else(|| ApiError::not_found("session", id))
    }

    pub fn new_job(&self, session: &str, revision: u64) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let job = Job {
            id: id.clone(),
            session: session.to_string(),
            revision,
            status: JobStatus::Running,
        };
        self.jobs.write().expect("job map lock").insert(id.clone(), job);
        id
    }

    pub fn finish_job(&self, id: &str, status: JobStatus) {
        if let Some(job) = self.jobs.write().expect("job map lock").get_mut(id) {
            job.status = status;
        }
    }

    pub fn job(&self, id: &str) -> Result<Job, ApiError> {
        self.jobs
            .read()
            .map_err(poisoned)?
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("job", id))
    }
}
