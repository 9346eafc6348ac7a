//! The clinic service: every operation, gated by session and permission and
//! run inside a store transaction.
//!
//! Operations take the caller's session token. Each one authorizes first,
//! then validates, then mutates; a successful mutation appends exactly one
//! audit entry.

mod bills;
mod documents;
mod patients;
mod procedures;
mod reception;
mod staff;

use std::fmt;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, NaiveDate, Utc};

use crate::auth::{Permission, Role, Session, SessionTable};
use crate::billing::FeeSchedule;
use crate::documents::DocumentKey;
use crate::error::{Error, Result};
use crate::ids::StaffId;
use crate::store::{ActorRef, AuditEvent, State, Store, Tx};

pub use documents::{FetchedDocument, UploadRequest};
pub use patients::{NewProblem, PatientChanges};
pub use procedures::{
    DocumentInfo, Finalized, NewProcedure, PatientHistory, ProblemHistory, ProcedureHistory,
    VisitHistory,
};
pub use reception::{PatientSummary, SearchKind, SearchResults, WaitingUpdate};
pub use staff::{NewStaff, StaffChanges};

pub const DEFAULT_SESSION_IDLE_MINUTES: i64 = 30;
pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 16 * 1024 * 1024;
/// Fixed cap on list results.
pub const LIST_LIMIT: usize = 100;

pub trait Clock: Send + Sync + fmt::Debug {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock moved by hand, for tests and replays.
#[derive(Debug)]
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self(Mutex::new(start))
    }

    pub fn set(&self, t: DateTime<Utc>) {
        *self.0.lock().expect("clock lock poisoned") = t;
    }

    pub fn advance(&self, by: Duration) {
        let mut t = self.0.lock().expect("clock lock poisoned");
        *t += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().expect("clock lock poisoned")
    }
}

#[derive(Debug, Clone)]
pub struct ClinicConfig {
    pub session_idle_minutes: i64,
    pub allow_legacy_md5: bool,
    pub max_upload_bytes: usize,
    pub fee_schedule: FeeSchedule,
    pub encryption_key: Option<DocumentKey>,
}

impl Default for ClinicConfig {
    fn default() -> Self {
        Self {
            session_idle_minutes: DEFAULT_SESSION_IDLE_MINUTES,
            allow_legacy_md5: false,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            fee_schedule: FeeSchedule::default(),
            encryption_key: None,
        }
    }
}

impl ClinicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.session_idle_minutes <= 0 {
            return Err(Error::ConfigInvalid(
                "session_idle_minutes must be positive".into(),
            ));
        }
        if self.max_upload_bytes == 0 {
            return Err(Error::ConfigInvalid("max_upload_bytes must be positive".into()));
        }
        self.fee_schedule.validate()
    }
}

/// The authenticated caller of an operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Actor {
    pub staff_id: StaffId,
    pub role: Role,
}

impl Actor {
    pub fn as_ref(&self) -> ActorRef {
        ActorRef::Staff(self.staff_id)
    }
}

pub struct Clinic {
    store: Store,
    sessions: Mutex<SessionTable>,
    config: ClinicConfig,
    clock: Arc<dyn Clock>,
}

impl fmt::Debug for Clinic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Clinic")
            .field("store", &self.store)
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Clinic {
    pub fn new(store: Store, config: ClinicConfig, clock: Arc<dyn Clock>) -> Result<Self> {
        config.validate()?;
        let idle = Duration::minutes(config.session_idle_minutes);
        Ok(Self {
            store,
            sessions: Mutex::new(SessionTable::new(idle)),
            config,
            clock,
        })
    }

    /// In-memory clinic on the system clock with default configuration.
    pub fn in_memory(config: ClinicConfig) -> Result<Self> {
        Self::new(Store::in_memory(), config, Arc::new(SystemClock))
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn config(&self) -> &ClinicConfig {
        &self.config
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub fn today(&self) -> NaiveDate {
        self.now().date_naive()
    }

    pub fn snapshot(&self) -> Arc<State> {
        self.store.snapshot()
    }

    fn sessions(&self) -> std::sync::MutexGuard<'_, SessionTable> {
        self.sessions.lock().expect("session lock poisoned")
    }

    /// Resolves a token to its live session without a permission check.
    pub fn session(&self, token: &str) -> Result<Session> {
        self.sessions().touch(token, self.now())
    }

    /// Checks the session and then the role matrix.
    pub fn authorize(&self, token: &str, permission: Permission) -> Result<Actor> {
        let session = self.session(token)?;
        let state = self.store.snapshot();
        let account = state
            .staff
            .get(&session.staff_id)
            .filter(|a| a.active)
            .ok_or(Error::AuthRequired)?;
        if !account.role.permits(permission) {
            return Err(Error::Forbidden);
        }
        Ok(Actor {
            staff_id: account.id,
            role: account.role,
        })
    }

    fn transact<T>(&self, f: impl FnOnce(&mut Tx<'_>) -> Result<T>) -> Result<T> {
        self.store.transact(self.now(), f)
    }

    /// Full store export; needs the role-management permission.
    pub fn export_snapshot(&self, token: &str) -> Result<String> {
        self.authorize(token, Permission::ManageRole)?;
        Ok(self.store.export())
    }

    /// Loads a snapshot into an empty store.
    pub fn import_snapshot(&self, stream: &str) -> Result<usize> {
        self.store.import(stream)
    }

    fn audit_only(&self, event: AuditEvent) -> Result<()> {
        self.store.append_audit(self.now(), vec![event])
    }
}
