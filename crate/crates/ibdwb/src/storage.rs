//! File-backed table store with a process-wide transaction manager.
//!
//! A database is a directory holding `db.manifest` plus a `.schema` and a
//! `.rows` file per table. Committed state is kept in memory as an
//! immutable snapshot; READ transactions read the snapshot taken at begin,
//! the single WRITE transaction works on a private copy that replaces the
//! snapshot (and is written to disk) on COMMIT. ROLLBACK discards the copy
//! and never touches the directory.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use ibdwb_core::codec;
use ibdwb_core::exec::run_statement;
use ibdwb_core::{SqlOutcome, TableSchema, Tables};
use thiserror::Error;

/// Open transactions allowed at once across one [`Storage`].
pub const MAX_TRANSACTIONS: usize = 5;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("{}: not an IB-DWB database ({reason})", path.display())]
    NotADatabase { path: PathBuf, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("transaction limit exceeded: {MAX_TRANSACTIONS} transactions already open")]
    TransactionLimitExceeded,
    #[error("{}: another transaction holds the writer slot", .0.display())]
    WriterBusy(PathBuf),
    #[error("unknown transaction {0}")]
    UnknownTransaction(u64),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StorageError + '_ {
    move |source| StorageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TxMode {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Commit,
    Rollback,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransactionHandle {
    id: u64,
    database: PathBuf,
    mode: TxMode,
}

impl TransactionHandle {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn database(&self) -> &Path {
        &self.database
    }

    pub fn mode(&self) -> TxMode {
        self.mode
    }
}

pub type DatabaseHandle = Arc<Database>;

pub struct Database {
    path: PathBuf,
    state: Mutex<DbState>,
}

struct DbState {
    committed: Arc<Tables>,
    writer: Option<u64>,
    readers: usize,
}

impl fmt::Debug for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Database").field("path", &self.path).finish()
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Database {
    /// Canonical directory path.
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn table_names(&self) -> Vec<String> {
        lock(&self.state).committed.keys().cloned().collect()
    }

    /// Committed schema of a table; the name is matched case-insensitively.
    pub fn schema(&self, table: &str) -> Option<TableSchema> {
        lock(&self.state)
            .committed
            .get(&table.to_ascii_uppercase())
            .map(|t| t.schema.clone())
    }

    /// Committed contents.
    pub fn snapshot(&self) -> Arc<Tables> {
        lock(&self.state).committed.clone()
    }

    fn load(path: PathBuf) -> Result<Tables, StorageError> {
        let manifest = path.join(codec::MANIFEST_FILE);
        let text = fs::read_to_string(&manifest).map_err(|e| StorageError::NotADatabase {
            path: path.clone(),
            reason: format!("cannot read manifest: {e}"),
        })?;
        let corrupt = |reason: String| StorageError::NotADatabase {
            path: path.clone(),
            reason,
        };
        let names = codec::decode_manifest(&text).map_err(|e| corrupt(e.to_string()))?;
        let mut tables = Tables::new();
        for name in names {
            let schema_path = path.join(codec::schema_file(&name));
            let rows_path = path.join(codec::rows_file(&name));
            let schema_text = fs::read_to_string(&schema_path).map_err(io_err(&schema_path))?;
            let rows_text = fs::read_to_string(&rows_path).map_err(io_err(&rows_path))?;
            let schema = codec::decode_schema(&name, &schema_text).map_err(|e| corrupt(e.to_string()))?;
            let rows = codec::decode_rows(&schema, &rows_text).map_err(|e| corrupt(e.to_string()))?;
            tables.insert(name, Arc::new(ibdwb_core::Table { schema, rows }));
        }
        Ok(tables)
    }

    fn persist(&self, base: &Tables, next: &Tables) -> Result<(), StorageError> {
        for (name, table) in next {
            if base.get(name).is_some_and(|b| Arc::ptr_eq(b, table)) {
                continue;
            }
            write_atomic(&self.path.join(codec::schema_file(name)), &codec::encode_schema(&table.schema))?;
            write_atomic(&self.path.join(codec::rows_file(name)), &codec::encode_rows(&table.rows))?;
        }
        for name in base.keys().filter(|n| !next.contains_key(*n)) {
            for file in [codec::schema_file(name), codec::rows_file(name)] {
                let p = self.path.join(file);
                match fs::remove_file(&p) {
                    Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(io_err(&p)(e)),
                    _ => {}
                }
            }
        }
        if !base.keys().eq(next.keys()) {
            write_atomic(
                &self.path.join(codec::MANIFEST_FILE),
                &codec::encode_manifest(next.keys().map(String::as_str)),
            )?;
        }
        Ok(())
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), StorageError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

struct TxState {
    db: DatabaseHandle,
    mode: TxMode,
    base: Arc<Tables>,
    working: Tables,
}

#[derive(Default)]
struct TxTable {
    next_id: u64,
    open: HashMap<u64, Arc<Mutex<TxState>>>,
}

#[derive(Default)]
struct StorageInner {
    databases: Mutex<HashMap<PathBuf, DatabaseHandle>>,
    txs: Mutex<TxTable>,
}

/// One program instance's view of its databases. Cloning shares state.
#[derive(Clone, Default)]
pub struct Storage {
    inner: Arc<StorageInner>,
}

impl Storage {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens (or, with `create_if_missing`, initializes) a database
    /// directory. Repeated opens of one directory share a handle.
    pub fn open_database(&self, path: &Path, create_if_missing: bool) -> Result<DatabaseHandle, StorageError> {
        let mut dbs = lock(&self.inner.databases);
        if let Ok(canon) = path.canonicalize() {
            if let Some(db) = dbs.get(&canon) {
                return Ok(db.clone());
            }
        }
        let manifest = path.join(codec::MANIFEST_FILE);
        if create_if_missing && !manifest.exists() {
            fs::create_dir_all(path).map_err(io_err(path))?;
            write_atomic(&manifest, &codec::encode_manifest([]))?;
        }
        let canon = path.canonicalize().map_err(|e| StorageError::NotADatabase {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let tables = Database::load(canon.clone())?;
        let db = Arc::new(Database {
            path: canon.clone(),
            state: Mutex::new(DbState {
                committed: Arc::new(tables),
                writer: None,
                readers: 0,
            }),
        });
        dbs.insert(canon, db.clone());
        Ok(db)
    }

    pub fn open_transactions(&self) -> usize {
        lock(&self.inner.txs).open.len()
    }

    pub fn transaction_begin(&self, db: &DatabaseHandle, mode: TxMode) -> Result<TransactionHandle, StorageError> {
        let mut txs = lock(&self.inner.txs);
        if txs.open.len() >= MAX_TRANSACTIONS {
            return Err(StorageError::TransactionLimitExceeded);
        }
        let id = txs.next_id;
        let base = {
            let mut st = lock(&db.state);
            if st.writer.is_some() {
                return Err(StorageError::WriterBusy(db.path.clone()));
            }
            match mode {
                TxMode::Write => st.writer = Some(id),
                TxMode::Read => st.readers += 1,
            }
            st.committed.clone()
        };
        txs.next_id += 1;
        let working = match mode {
            TxMode::Write => (*base).clone(),
            TxMode::Read => Tables::new(),
        };
        txs.open.insert(
            id,
            Arc::new(Mutex::new(TxState {
                db: db.clone(),
                mode,
                base,
                working,
            })),
        );
        Ok(TransactionHandle {
            id,
            database: db.path.clone(),
            mode,
        })
    }

    pub fn transaction_end(&self, tx: &TransactionHandle, verdict: Verdict) -> Result<(), StorageError> {
        let mut txs = lock(&self.inner.txs);
        let state = txs
            .open
            .remove(&tx.id)
            .ok_or(StorageError::UnknownTransaction(tx.id))?;
        let mut state = lock(&state);
        let db = state.db.clone();
        let result = match (state.mode, verdict) {
            (TxMode::Write, Verdict::Commit) => {
                let working = std::mem::take(&mut state.working);
                match db.persist(&state.base, &working) {
                    Ok(()) => {
                        lock(&db.state).committed = Arc::new(working);
                        Ok(())
                    }
                    Err(e) => {
                        log::error!("commit of transaction {} failed: {e}", tx.id);
                        Err(e)
                    }
                }
            }
            _ => Ok(()),
        };
        let mut st = lock(&db.state);
        match state.mode {
            TxMode::Write => st.writer = None,
            TxMode::Read => st.readers -= 1,
        }
        result
    }

    /// Runs one statement inside `tx`. Statement errors are reported in
    /// the outcome and leave the transaction as it was before the call.
    pub fn execute_sql(&self, tx: &TransactionHandle, statement: &str) -> Result<SqlOutcome, StorageError> {
        let state = lock(&self.inner.txs)
            .open
            .get(&tx.id)
            .cloned()
            .ok_or(StorageError::UnknownTransaction(tx.id))?;
        let mut state = lock(&state);
        Ok(match state.mode {
            TxMode::Write => run_statement(statement, &mut state.working, true),
            TxMode::Read => {
                let mut view = (*state.base).clone();
                run_statement(statement, &mut view, false)
            }
        })
    }

    /// Runs one statement in its own transaction: COMMIT on success,
    /// ROLLBACK on failure.
    pub fn execute_autocommit(&self, db: &DatabaseHandle, statement: &str) -> Result<SqlOutcome, StorageError> {
        let mode = match ibdwb_core::sql::parse_statement(statement) {
            Ok(s) if s.is_write() => TxMode::Write,
            _ => TxMode::Read,
        };
        let tx = self.transaction_begin(db, mode)?;
        let outcome = self.execute_sql(&tx, statement);
        let verdict = match &outcome {
            Ok(o) if o.success => Verdict::Commit,
            _ => Verdict::Rollback,
        };
        self.transaction_end(&tx, verdict)?;
        outcome
    }
}
