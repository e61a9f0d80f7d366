//! Module platforms: versioned registry, install/uninstall, and handing
//! control to a module's entry point.
//!
//! The data plug platform and the discoverer platform are the same code
//! with a different [`PlatformKind`]. Both keep their rows in the system
//! database, tagged with the platform name.

use std::collections::HashMap;
use std::ffi::c_void;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use ibdwb_core::abi::EntryFn;
use ibdwb_core::host::LogLevel;
use ibdwb_core::initfile::{parse_init_file, InitFileMalformed, ModuleKind};
use ibdwb_core::sql::quote;
use ibdwb_core::{DataSet, SqlError, Value};
use libloading::Library;
use thiserror::Error;

use crate::host::HostContext;
use crate::kernel::{Kernel, KernelError, SessionKey};
use crate::storage::{TxMode, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlatformKind {
    DataPlug,
    Discoverer,
}

impl PlatformKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlatformKind::DataPlug => "DATAPLUG",
            PlatformKind::Discoverer => "DISCOVERER",
        }
    }
}

impl fmt::Display for PlatformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleRecord {
    pub name: String,
    pub version: u32,
    pub path: PathBuf,
    pub initialization: String,
    pub description: String,
    pub author: String,
    pub kind: ModuleKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ActiveEntry {
    pub name: String,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DModuleEntry {
    pub name: String,
    pub version: u32,
    pub path: PathBuf,
    pub kind: ModuleKind,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstallStatus {
    Installed,
    Upgraded { from: u32 },
}

impl fmt::Display for InstallStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstallStatus::Installed => f.write_str("Module installed"),
            InstallStatus::Upgraded { from } => write!(f, "Module upgraded from version {from}"),
        }
    }
}

/// Result of one activation: the module's status and what it logged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Activation {
    pub status: i32,
    pub log: Vec<(LogLevel, String)>,
}

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    InitFileMalformed(InitFileMalformed),
    #[error("module library {} not found", .0.display())]
    LibraryMissing(PathBuf),
    #[error("Tool already installed")]
    AlreadyInstalled,
    #[error("Attempt to install older version")]
    OlderVersion,
    #[error("module {0:?} is not installed")]
    ModuleNotFound(String),
    #[error("module {name:?} is active for user {user:?}")]
    ModuleActive { name: String, user: String },
    #[error("{}: entry symbol {symbol} not found", path.display())]
    EntrySymbolMissing { path: PathBuf, symbol: &'static str },
    #[error("{}: cannot load library: {reason}", path.display())]
    LibraryLoadFailure { path: PathBuf, reason: String },
    #[error("system database: {0}")]
    Kernel(#[from] KernelError),
    #[error("system database: {0}")]
    Registry(SqlError),
}

const TOOLTABLE: &str = "TOOLTABLE";
const WIZARDTABLE: &str = "WIZARDTABLE";

fn registry_table(kind: ModuleKind) -> &'static str {
    match kind {
        ModuleKind::Tool => TOOLTABLE,
        ModuleKind::Wizard => WIZARDTABLE,
    }
}

/// DDL of the registry tables kept in the system database.
pub const SYSTEM_TABLES: [(&str, &str); 4] = [
    (
        TOOLTABLE,
        "CREATE TABLE TOOLTABLE (PLATFORM VARCHAR(16) NOT NULL, NAME VARCHAR(255) NOT NULL, \
         VERSION INTEGER NOT NULL, PATH VARCHAR(4096) NOT NULL, INITIALIZATION VARCHAR(4096) NOT NULL, \
         DESCRIPTION VARCHAR(4096) NOT NULL, AUTHOR VARCHAR(255) NOT NULL)",
    ),
    (
        WIZARDTABLE,
        "CREATE TABLE WIZARDTABLE (PLATFORM VARCHAR(16) NOT NULL, NAME VARCHAR(255) NOT NULL, \
         VERSION INTEGER NOT NULL, PATH VARCHAR(4096) NOT NULL, INITIALIZATION VARCHAR(4096) NOT NULL, \
         DESCRIPTION VARCHAR(4096) NOT NULL, AUTHOR VARCHAR(255) NOT NULL)",
    ),
    (
        "DMODULETABLE",
        "CREATE TABLE DMODULETABLE (PLATFORM VARCHAR(16) NOT NULL, NAME VARCHAR(255) NOT NULL, \
         VERSION INTEGER NOT NULL, PATH VARCHAR(4096) NOT NULL, TYPE VARCHAR(16) NOT NULL, \
         DESCRIPTION VARCHAR(4096) NOT NULL)",
    ),
    (
        "TACTIVETABLE",
        "CREATE TABLE TACTIVETABLE (PLATFORM VARCHAR(16) NOT NULL, NAME VARCHAR(255) NOT NULL, \
         USERNAME VARCHAR(255) NOT NULL)",
    ),
];

/// Opens (creating if needed) the system database and returns its
/// canonical path.
pub fn open_system_database(kernel: &Kernel, path: &Path) -> Result<PathBuf, KernelError> {
    let db = kernel.storage().open_database(path, true)?;
    Ok(db.path().to_path_buf())
}

#[derive(Debug)]
pub(crate) enum SystemError {
    Kernel(KernelError),
    Sql(SqlError),
}

impl fmt::Display for SystemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemError::Kernel(e) => write!(f, "system database: {e}"),
            SystemError::Sql(e) => write!(f, "system database: {e}"),
        }
    }
}

impl std::error::Error for SystemError {}

impl From<KernelError> for SystemError {
    fn from(e: KernelError) -> Self {
        SystemError::Kernel(e)
    }
}

impl From<SqlError> for SystemError {
    fn from(e: SqlError) -> Self {
        SystemError::Sql(e)
    }
}

impl From<SystemError> for PlatformError {
    fn from(e: SystemError) -> Self {
        match e {
            SystemError::Kernel(e) => PlatformError::Kernel(e),
            SystemError::Sql(e) => PlatformError::Registry(e),
        }
    }
}

/// A statement sequence on the system database under the system lock.
pub(crate) struct SystemTx<'a> {
    kernel: &'a Kernel,
    key: SessionKey,
}

impl SystemTx<'_> {
    pub(crate) fn query(&self, sql: &str) -> Result<DataSet, SystemError> {
        Ok(self.kernel.execute(&self.key, "", sql)?.into_result()?)
    }

    /// Runs `f` in one WRITE transaction: COMMIT if it returns `Ok`,
    /// ROLLBACK otherwise.
    pub(crate) fn write<R, E: From<KernelError>>(
        kernel: &Kernel,
        sysdb: &Path,
        user: &str,
        f: impl FnOnce(&SystemTx<'_>) -> Result<R, E>,
    ) -> Result<R, E> {
        let _guard = kernel.system_lock();
        let tx = SystemTx {
            kernel,
            key: SessionKey::new(sysdb, user),
        };
        kernel.open_explicit_transaction(&tx.key, "", TxMode::Write)?;
        let r = f(&tx);
        let verdict = if r.is_ok() { Verdict::Commit } else { Verdict::Rollback };
        kernel.close_explicit_transaction(&tx.key, verdict)?;
        r
    }

    /// Runs `f` under the system lock in auto-committed statements.
    pub(crate) fn read<R>(kernel: &Kernel, sysdb: &Path, user: &str, f: impl FnOnce(&SystemTx<'_>) -> R) -> R {
        let _guard = kernel.system_lock();
        f(&SystemTx {
            kernel,
            key: SessionKey::new(sysdb, user),
        })
    }
}

fn text(v: &Value) -> String {
    v.render().unwrap_or_default()
}

fn int(v: &Value) -> u32 {
    match v {
        Value::Int(i) => u32::try_from(*i).unwrap_or(0),
        _ => 0,
    }
}

/// Loaded libraries stay mapped for the life of the process: module code
/// may leave thread-local destructors or other state behind, and unmapping
/// it under them is undefined behaviour.
fn load_library(path: &Path) -> Result<Arc<Library>, PlatformError> {
    static LOADED: OnceLock<Mutex<HashMap<PathBuf, Arc<Library>>>> = OnceLock::new();
    let mut loaded = LOADED
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    if let Some(lib) = loaded.get(path) {
        return Ok(lib.clone());
    }
    // SAFETY: loading a module runs its initializers; installing a module
    // is the operator's statement that it is trusted code.
    let lib = unsafe { Library::new(path) }.map_err(|e| PlatformError::LibraryLoadFailure {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let lib = Arc::new(lib);
    loaded.insert(path.to_path_buf(), lib.clone());
    Ok(lib)
}

fn resolve_entry(record: &ModuleRecord) -> Result<EntryFn, PlatformError> {
    let lib = load_library(&record.path)?;
    let symbol = record.kind.entry_symbol();
    // SAFETY: the entry symbol's type is fixed by the module contract.
    let entry = unsafe { lib.get::<EntryFn>(symbol.as_bytes()) }.map_err(|_| PlatformError::EntrySymbolMissing {
        path: record.path.clone(),
        symbol,
    })?;
    // The library is never unloaded, so the bare pointer stays valid.
    Ok(*entry)
}

pub struct Platform {
    kind: PlatformKind,
    kernel: Arc<Kernel>,
    sysdb: PathBuf,
    user: String,
}

impl Platform {
    /// Binds a platform to the system database at `sysdb`, creating the
    /// database and any missing registry tables.
    pub fn open(kernel: Arc<Kernel>, sysdb: &Path, kind: PlatformKind) -> Result<Self, PlatformError> {
        let sysdb = open_system_database(&kernel, sysdb)?;
        let platform = Platform {
            kind,
            user: format!("ibdwb.{}", kind.as_str().to_ascii_lowercase()),
            kernel,
            sysdb,
        };
        let db = platform.kernel.storage().open_database(&platform.sysdb, false).map_err(KernelError::from)?;
        if SYSTEM_TABLES.iter().any(|(t, _)| db.schema(t).is_none()) {
            platform.write(|tx| {
                for (table, ddl) in SYSTEM_TABLES {
                    if db.schema(table).is_none() {
                        tx.query(ddl)?;
                    }
                }
                Ok(())
            })?;
        }
        Ok(platform)
    }

    pub fn kind(&self) -> PlatformKind {
        self.kind
    }

    pub fn system_database(&self) -> &Path {
        &self.sysdb
    }

    fn write<R>(&self, f: impl FnOnce(&SystemTx<'_>) -> Result<R, PlatformError>) -> Result<R, PlatformError> {
        SystemTx::write(&self.kernel, &self.sysdb, &self.user, f)
    }

    fn read<R>(&self, f: impl FnOnce(&SystemTx<'_>) -> Result<R, PlatformError>) -> Result<R, PlatformError> {
        SystemTx::read(&self.kernel, &self.sysdb, &self.user, f)
    }

    fn q(&self, tx: &SystemTx<'_>, sql: &str) -> Result<DataSet, PlatformError> {
        Ok(tx.query(sql)?)
    }

    fn find(&self, tx: &SystemTx<'_>, name: Option<&str>) -> Result<Vec<ModuleRecord>, PlatformError> {
        let mut out = Vec::new();
        for kind in [ModuleKind::Tool, ModuleKind::Wizard] {
            let mut sql = format!(
                "SELECT NAME, VERSION, PATH, INITIALIZATION, DESCRIPTION, AUTHOR FROM {} WHERE PLATFORM = {}",
                registry_table(kind),
                quote(self.kind.as_str())
            );
            if let Some(n) = name {
                sql.push_str(&format!(" AND NAME = {}", quote(n)));
            }
            for r in self.q(tx, &sql)?.rows {
                out.push(ModuleRecord {
                    name: text(&r[0]),
                    version: int(&r[1]),
                    path: PathBuf::from(text(&r[2])),
                    initialization: text(&r[3]),
                    description: text(&r[4]),
                    author: text(&r[5]),
                    kind,
                });
            }
        }
        out.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(out)
    }

    fn actives(&self, tx: &SystemTx<'_>, name: Option<&str>) -> Result<Vec<ActiveEntry>, PlatformError> {
        let mut sql = format!(
            "SELECT NAME, USERNAME FROM TACTIVETABLE WHERE PLATFORM = {}",
            quote(self.kind.as_str())
        );
        if let Some(n) = name {
            sql.push_str(&format!(" AND NAME = {}", quote(n)));
        }
        let mut out: Vec<ActiveEntry> = self
            .q(tx, &sql)?
            .rows
            .iter()
            .map(|r| ActiveEntry {
                name: text(&r[0]),
                user: text(&r[1]),
            })
            .collect();
        out.sort();
        Ok(out)
    }

    fn delete_module(&self, tx: &SystemTx<'_>, name: &str) -> Result<(), PlatformError> {
        for table in [TOOLTABLE, WIZARDTABLE, "DMODULETABLE"] {
            self.q(
                tx,
                &format!(
                    "DELETE FROM {table} WHERE PLATFORM = {} AND NAME = {}",
                    quote(self.kind.as_str()),
                    quote(name)
                ),
            )?;
        }
        Ok(())
    }

    /// Registers the module described by the init file at `init_path`.
    /// The library must sit next to it with the same base name.
    pub fn install_module(&self, init_path: &Path) -> Result<InstallStatus, PlatformError> {
        let raw = std::fs::read(init_path).map_err(|source| PlatformError::Io {
            path: init_path.to_path_buf(),
            source,
        })?;
        let init = parse_init_file(&String::from_utf8_lossy(&raw)).map_err(PlatformError::InitFileMalformed)?;
        for w in &init.warnings {
            log::warn!("{}: {w}", init_path.display());
        }
        let library = init_path.with_extension(std::env::consts::DLL_EXTENSION);
        let library = match library.canonicalize() {
            Ok(p) if p.is_file() => p,
            _ => return Err(PlatformError::LibraryMissing(library)),
        };
        let record = ModuleRecord {
            name: init.name,
            version: init.version,
            path: library,
            initialization: init.init,
            description: init.desc,
            author: init.author,
            kind: init.kind,
        };

        self.write(|tx| {
            let status = match self.find(tx, Some(&record.name))?.first() {
                None => InstallStatus::Installed,
                Some(old) if old.version == record.version => return Err(PlatformError::AlreadyInstalled),
                Some(old) if old.version > record.version => return Err(PlatformError::OlderVersion),
                Some(old) => {
                    if let Some(a) = self.actives(tx, Some(&record.name))?.into_iter().next() {
                        return Err(PlatformError::ModuleActive {
                            name: a.name,
                            user: a.user,
                        });
                    }
                    self.delete_module(tx, &record.name)?;
                    InstallStatus::Upgraded { from: old.version }
                }
            };
            let platform = quote(self.kind.as_str());
            let name = quote(&record.name);
            let path = quote(&record.path.to_string_lossy());
            self.q(
                tx,
                &format!(
                    "INSERT INTO {} VALUES ({platform}, {name}, {}, {path}, {}, {}, {})",
                    registry_table(record.kind),
                    record.version,
                    quote(&record.initialization),
                    quote(&record.description),
                    quote(&record.author)
                ),
            )?;
            self.q(
                tx,
                &format!(
                    "INSERT INTO DMODULETABLE VALUES ({platform}, {name}, {}, {path}, {}, {})",
                    record.version,
                    quote(record.kind.as_str()),
                    quote(&record.description)
                ),
            )?;
            Ok(status)
        })
    }

    pub fn uninstall_module(&self, name: &str) -> Result<(), PlatformError> {
        self.write(|tx| {
            if self.find(tx, Some(name))?.is_empty() {
                return Err(PlatformError::ModuleNotFound(name.into()));
            }
            if let Some(a) = self.actives(tx, Some(name))?.into_iter().next() {
                return Err(PlatformError::ModuleActive {
                    name: a.name,
                    user: a.user,
                });
            }
            self.delete_module(tx, name)
        })
    }

    /// Loads the module and runs its entry point on this thread until it
    /// returns. `args` follow the activating user in the module's
    /// argument list.
    pub fn activate_module(&self, name: &str, user: &str, args: &[String]) -> Result<Activation, PlatformError> {
        self.activate_with(name, user, args, resolve_entry)
    }

    pub(crate) fn activate_with(
        &self,
        name: &str,
        user: &str,
        args: &[String],
        resolve: impl FnOnce(&ModuleRecord) -> Result<EntryFn, PlatformError>,
    ) -> Result<Activation, PlatformError> {
        let record = self.write(|tx| {
            let record = self
                .find(tx, Some(name))?
                .into_iter()
                .next()
                .ok_or_else(|| PlatformError::ModuleNotFound(name.into()))?;
            if self.actives(tx, Some(name))?.iter().any(|a| a.user == user) {
                return Err(PlatformError::ModuleActive {
                    name: name.into(),
                    user: user.into(),
                });
            }
            self.q(
                tx,
                &format!(
                    "INSERT INTO TACTIVETABLE VALUES ({}, {}, {})",
                    quote(self.kind.as_str()),
                    quote(name),
                    quote(user)
                ),
            )?;
            Ok(record)
        })?;

        let result = resolve(&record).map(|entry| self.call(&record, user, args, entry));

        if let Err(e) = self.release(name, user) {
            log::error!("could not clear activation of {name} for {user}: {e}");
        }
        result
    }

    fn call(&self, record: &ModuleRecord, user: &str, args: &[String], entry: EntryFn) -> Activation {
        let init = match record.kind {
            ModuleKind::Wizard => record.initialization.as_str(),
            ModuleKind::Tool => {
                if !record.initialization.is_empty() {
                    log::warn!(
                        "tool {} has INIT={:?}; tools are started without an initialization string",
                        record.name,
                        record.initialization
                    );
                }
                ""
            }
        };
        let mut all_args = Vec::with_capacity(args.len() + 1);
        all_args.push(user.to_string());
        all_args.extend_from_slice(args);
        let ctx = HostContext::new(self.kernel.clone(), all_args);
        let services = HostContext::services();
        // SAFETY: ctx and services outlive the call; init is valid UTF-8
        // of the given length.
        let status = unsafe {
            entry(
                &ctx as *const HostContext as *mut c_void,
                &services,
                init.as_ptr(),
                init.len(),
            )
        };
        Activation {
            status,
            log: ctx.take_log(),
        }
    }

    fn release(&self, name: &str, user: &str) -> Result<bool, PlatformError> {
        self.write(|tx| {
            let present = self.actives(tx, Some(name))?.iter().any(|a| a.user == user);
            if present {
                self.q(
                    tx,
                    &format!(
                        "DELETE FROM TACTIVETABLE WHERE PLATFORM = {} AND NAME = {} AND USERNAME = {}",
                        quote(self.kind.as_str()),
                        quote(name),
                        quote(user)
                    ),
                )?;
            }
            Ok(present)
        })
    }

    /// Clears an activation left behind by a module that never returned.
    pub fn deactivate_module(&self, name: &str, user: &str) -> Result<(), PlatformError> {
        if !self.release(name, user)? {
            log::warn!("module {name} is not active for user {user}");
        }
        Ok(())
    }

    pub fn list_modules(&self) -> Result<Vec<ModuleRecord>, PlatformError> {
        self.read(|tx| self.find(tx, None))
    }

    pub fn active_entries(&self) -> Result<Vec<ActiveEntry>, PlatformError> {
        self.read(|tx| self.actives(tx, None))
    }

    pub fn dmodule_entries(&self) -> Result<Vec<DModuleEntry>, PlatformError> {
        self.read(|tx| {
            let sql = format!(
                "SELECT NAME, VERSION, PATH, TYPE, DESCRIPTION FROM DMODULETABLE WHERE PLATFORM = {} ORDER BY NAME",
                quote(self.kind.as_str())
            );
            Ok(self
                .q(tx, &sql)?
                .rows
                .iter()
                .map(|r| DModuleEntry {
                    name: text(&r[0]),
                    version: int(&r[1]),
                    path: PathBuf::from(text(&r[2])),
                    kind: ModuleKind::parse(&text(&r[3])).unwrap_or(ModuleKind::Tool),
                    description: text(&r[4]),
                })
                .collect())
        })
    }

    #[cfg(test)]
    fn inject_active(&self, name: &str, user: &str) {
        self.write(|tx| {
            self.q(
                tx,
                &format!(
                    "INSERT INTO TACTIVETABLE VALUES ({}, {}, {})",
                    quote(self.kind.as_str()),
                    quote(name),
                    quote(user)
                ),
            )
        })
        .unwrap();
    }
}
