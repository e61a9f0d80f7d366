//! Request router and session table.
//!
//! Every storage request names a (path, user) session. Unknown sessions
//! are registered on first use and dropped again as soon as they hold no
//! open transaction or result cursor.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use ibdwb_core::SqlOutcome;
use thiserror::Error;

use crate::storage::{DatabaseHandle, Storage, StorageError, TransactionHandle, TxMode, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionKey {
    pub path: PathBuf,
    pub user: String,
}

impl SessionKey {
    pub fn new(path: impl Into<PathBuf>, user: impl Into<String>) -> Self {
        SessionKey {
            path: path.into(),
            user: user.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Execute,
    Disconnect,
    Status,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelRequest {
    pub action: Action,
    /// Carried for completeness; routing uses `path` only.
    pub database_name: String,
    pub path: PathBuf,
    pub table_name: Option<String>,
    pub user: String,
    /// Recorded in the session, never checked.
    pub password: String,
    pub statement: Option<String>,
}

impl KernelRequest {
    pub fn execute(path: impl Into<PathBuf>, user: &str, statement: &str) -> Self {
        let path = path.into();
        KernelRequest {
            action: Action::Execute,
            database_name: database_name(&path),
            path,
            table_name: None,
            user: user.into(),
            password: String::new(),
            statement: Some(statement.into()),
        }
    }

    pub fn disconnect(path: impl Into<PathBuf>, user: &str) -> Self {
        let path = path.into();
        KernelRequest {
            action: Action::Disconnect,
            database_name: database_name(&path),
            path,
            table_name: None,
            user: user.into(),
            password: String::new(),
            statement: None,
        }
    }

    pub fn status() -> Self {
        KernelRequest {
            action: Action::Status,
            database_name: String::new(),
            path: PathBuf::new(),
            table_name: None,
            user: String::new(),
            password: String::new(),
            statement: None,
        }
    }

    fn key(&self) -> SessionKey {
        SessionKey::new(self.path.clone(), self.user.clone())
    }
}

fn database_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionReportRow {
    pub path: PathBuf,
    pub user: String,
    pub open_tx: usize,
    pub gauge: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelResponse {
    Outcome(SqlOutcome),
    Report(Vec<SessionReportRow>),
    Disconnected,
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("malformed request: {0}")]
    MalformedRequest(String),
    #[error("session already has an open transaction")]
    TransactionAlreadyOpen,
    #[error("session has no open transaction")]
    NoOpenTransaction,
}

struct Session {
    db: DatabaseHandle,
    state: Mutex<SessionState>,
}

#[derive(Default)]
struct SessionState {
    #[allow(dead_code)]
    password: String,
    explicit: Option<TransactionHandle>,
    cursors: usize,
}

impl SessionState {
    fn gauge(&self) -> usize {
        usize::from(self.explicit.is_some()) + self.cursors
    }
}

struct Entry {
    session: Arc<Session>,
    /// Requests currently running on this session. Only touched under
    /// the table lock.
    in_flight: usize,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

pub struct Kernel {
    storage: Storage,
    sessions: Mutex<HashMap<SessionKey, Entry>>,
    system: Mutex<()>,
}

impl Kernel {
    pub fn new(storage: Storage) -> Self {
        Kernel {
            storage,
            sessions: Mutex::new(HashMap::new()),
            system: Mutex::new(()),
        }
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    /// Serializes writers of the system database (module registries and
    /// cube catalog).
    pub fn system_lock(&self) -> MutexGuard<'_, ()> {
        lock(&self.system)
    }

    pub fn session_count(&self) -> usize {
        lock(&self.sessions).len()
    }

    pub fn dispatch(&self, req: &KernelRequest) -> Result<KernelResponse, KernelError> {
        match req.action {
            Action::Status => Ok(KernelResponse::Report(self.status())),
            Action::Disconnect => {
                self.disconnect(&req.key());
                Ok(KernelResponse::Disconnected)
            }
            Action::Execute => {
                let Some(stmt) = &req.statement else {
                    return Err(KernelError::MalformedRequest("EXECUTE without a statement".into()));
                };
                if req.path.as_os_str().is_empty() {
                    return Err(KernelError::MalformedRequest("EXECUTE without a database path".into()));
                }
                let outcome = self.with_session(&req.key(), &req.password, |storage, db, st| {
                    run(storage, db, st, stmt)
                })??;
                Ok(KernelResponse::Outcome(outcome))
            }
        }
    }

    /// EXECUTE shorthand.
    pub fn execute(&self, key: &SessionKey, password: &str, statement: &str) -> Result<SqlOutcome, KernelError> {
        self.with_session(key, password, |storage, db, st| run(storage, db, st, statement))?
    }

    /// Like [`Kernel::execute`], but a successful statement leaves one
    /// result cursor open on the session until [`Kernel::release_cursor`].
    pub fn execute_with_cursor(
        &self,
        key: &SessionKey,
        password: &str,
        statement: &str,
    ) -> Result<SqlOutcome, KernelError> {
        self.with_session(key, password, |storage, db, st| {
            let outcome = run(storage, db, st, statement)?;
            if outcome.success {
                st.cursors += 1;
            }
            Ok(outcome)
        })?
    }

    pub fn release_cursor(&self, key: &SessionKey) {
        let mut table = lock(&self.sessions);
        if let Some(entry) = table.get(key) {
            let mut st = lock(&entry.session.state);
            st.cursors = st.cursors.saturating_sub(1);
            let idle = st.gauge() == 0 && entry.in_flight == 0;
            drop(st);
            if idle {
                table.remove(key);
            }
        }
    }

    pub fn open_explicit_transaction(
        &self,
        key: &SessionKey,
        password: &str,
        mode: TxMode,
    ) -> Result<TransactionHandle, KernelError> {
        self.with_session(key, password, |storage, db, st| {
            if st.explicit.is_some() {
                return Err(KernelError::TransactionAlreadyOpen);
            }
            let tx = storage.transaction_begin(db, mode)?;
            st.explicit = Some(tx.clone());
            Ok(tx)
        })?
    }

    pub fn close_explicit_transaction(&self, key: &SessionKey, verdict: Verdict) -> Result<(), KernelError> {
        if !lock(&self.sessions).contains_key(key) {
            return Err(KernelError::NoOpenTransaction);
        }
        self.with_session(key, "", |storage, _db, st| {
            let tx = st.explicit.take().ok_or(KernelError::NoOpenTransaction)?;
            storage.transaction_end(&tx, verdict)?;
            Ok(())
        })?
    }

    pub fn status(&self) -> Vec<SessionReportRow> {
        let table = lock(&self.sessions);
        let mut rows: Vec<SessionReportRow> = table
            .iter()
            .map(|(k, e)| {
                let st = lock(&e.session.state);
                SessionReportRow {
                    path: k.path.clone(),
                    user: k.user.clone(),
                    open_tx: usize::from(st.explicit.is_some()),
                    gauge: st.gauge(),
                }
            })
            .collect();
        rows.sort_by(|a, b| (&a.path, &a.user).cmp(&(&b.path, &b.user)));
        rows
    }

    fn disconnect(&self, key: &SessionKey) {
        let Some(entry) = lock(&self.sessions).remove(key) else {
            return;
        };
        let mut st = lock(&entry.session.state);
        if let Some(tx) = st.explicit.take() {
            if let Err(e) = self.storage.transaction_end(&tx, Verdict::Rollback) {
                log::warn!("rollback on disconnect failed: {e}");
            }
        }
        st.cursors = 0;
    }

    /// Registers the session if needed, runs `f` with the session locked,
    /// then evicts the session if it holds nothing.
    fn with_session<R>(
        &self,
        key: &SessionKey,
        password: &str,
        f: impl FnOnce(&Storage, &DatabaseHandle, &mut SessionState) -> R,
    ) -> Result<R, KernelError> {
        let session = {
            let mut table = lock(&self.sessions);
            let entry = match table.get_mut(key) {
                Some(e) => e,
                None => {
                    let db = self.storage.open_database(&key.path, false)?;
                    let state = SessionState {
                        password: password.to_string(),
                        ..SessionState::default()
                    };
                    table.entry(key.clone()).or_insert(Entry {
                        session: Arc::new(Session {
                            db,
                            state: Mutex::new(state),
                        }),
                        in_flight: 0,
                    })
                }
            };
            entry.in_flight += 1;
            entry.session.clone()
        };

        let result = {
            let mut st = lock(&session.state);
            if !password.is_empty() {
                st.password = password.to_string();
            }
            f(&self.storage, &session.db, &mut st)
        };

        let mut table = lock(&self.sessions);
        if let Some(entry) = table.get_mut(key) {
            if Arc::ptr_eq(&entry.session, &session) {
                entry.in_flight -= 1;
                if entry.in_flight == 0 && lock(&session.state).gauge() == 0 {
                    table.remove(key);
                }
            }
        }
        Ok(result)
    }
}

fn run(storage: &Storage, db: &DatabaseHandle, st: &SessionState, statement: &str) -> Result<SqlOutcome, KernelError> {
    Ok(match &st.explicit {
        Some(tx) => storage.execute_sql(tx, statement)?,
        None => storage.execute_autocommit(db, statement)?,
    })
}
