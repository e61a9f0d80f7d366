//! Host side of the module ABI, plus an in-process [`Host`] over the
//! kernel for linking module code directly.

use std::collections::HashMap;
use std::ffi::c_void;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use ibdwb_core::abi::{status, HostServices, HostStr, INTERFACE_VERSION};
use ibdwb_core::host::{Host, HostError, LogLevel, TextRow};
use ibdwb_core::DataSet;

use crate::kernel::{Kernel, SessionKey};

/// Reported by the `host_version` service.
pub const HOST_VERSION: i32 = 1;

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

struct Cursor {
    key: SessionKey,
    dataset: DataSet,
    /// Index of the next row to hand out.
    next: usize,
    current: TextRow,
}

/// State behind the opaque context pointer of one activation.
pub struct HostContext {
    kernel: Arc<Kernel>,
    args: Vec<String>,
    cursors: Mutex<HashMap<u64, Cursor>>,
    next_handle: AtomicU64,
    log: Mutex<Vec<(LogLevel, String)>>,
}

impl HostContext {
    pub fn new(kernel: Arc<Kernel>, args: Vec<String>) -> Self {
        HostContext {
            kernel,
            args,
            cursors: Mutex::new(HashMap::new()),
            next_handle: AtomicU64::new(1),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Messages the module logged so far.
    pub fn take_log(&self) -> Vec<(LogLevel, String)> {
        std::mem::take(&mut *lock(&self.log))
    }

    pub fn open_cursors(&self) -> usize {
        lock(&self.cursors).len()
    }

    fn record(&self, level: LogLevel, message: &str) {
        let line = message.to_string();
        match level {
            LogLevel::Error => log::error!(target: "module", "{line}"),
            LogLevel::Warn => log::warn!(target: "module", "{line}"),
            LogLevel::Info => log::info!(target: "module", "{line}"),
            LogLevel::Debug => log::debug!(target: "module", "{line}"),
        }
        lock(&self.log).push((level, line));
    }

    fn execute(&self, path: &str, user: &str, password: &str, statement: &str) -> Result<u64, i32> {
        let key = SessionKey::new(PathBuf::from(path), user);
        let outcome = match self.kernel.execute_with_cursor(&key, password, statement) {
            Ok(o) => o,
            Err(e) => {
                self.record(LogLevel::Warn, &format!("host: {e}"));
                return Err(status::KERNEL_ERROR);
            }
        };
        if let Some(e) = outcome.error {
            return Err(e.code());
        }
        let handle = self.next_handle.fetch_add(1, Ordering::Relaxed);
        lock(&self.cursors).insert(
            handle,
            Cursor {
                key,
                dataset: outcome.dataset,
                next: 0,
                current: TextRow::new(),
            },
        );
        Ok(handle)
    }

    fn close(&self, handle: u64) {
        if let Some(c) = lock(&self.cursors).remove(&handle) {
            self.kernel.release_cursor(&c.key);
        }
    }

    /// Services table whose functions expect a `*const HostContext` as
    /// their context argument.
    pub fn services() -> HostServices {
        HostServices {
            interface_version: INTERFACE_VERSION,
            execute_sql: svc_execute_sql,
            result_next_row: svc_result_next_row,
            result_column_text: svc_result_column_text,
            result_close: svc_result_close,
            log: svc_log,
            host_version: svc_host_version,
            arg_count: svc_arg_count,
            arg_text: svc_arg_text,
        }
    }
}

impl Drop for HostContext {
    fn drop(&mut self) {
        // Modules that forget to close results must not pin sessions.
        let left: Vec<Cursor> = lock(&self.cursors).drain().map(|(_, c)| c).collect();
        for c in left {
            self.kernel.release_cursor(&c.key);
        }
    }
}

/// # Safety
/// `ctx` must be the pointer the host passed to the running entry.
unsafe fn context<'a>(ctx: *mut c_void) -> Option<&'a HostContext> {
    // SAFETY: the host only ever passes a live HostContext.
    unsafe { (ctx as *const HostContext).as_ref() }
}

unsafe extern "C" fn svc_execute_sql(
    ctx: *mut c_void,
    path: HostStr,
    user: HostStr,
    password: HostStr,
    statement: HostStr,
    out_result: *mut u64,
) -> i32 {
    // SAFETY: contract of the service table.
    let Some(host) = (unsafe { context(ctx) }) else {
        return status::BAD_ARGUMENT;
    };
    // SAFETY: module passes readable strings for the duration of the call.
    let (Some(path), Some(user), Some(password), Some(statement)) =
        (unsafe { (path.as_str(), user.as_str(), password.as_str(), statement.as_str()) })
    else {
        return status::BAD_ARGUMENT;
    };
    if out_result.is_null() {
        return status::BAD_ARGUMENT;
    }
    match host.execute(path, user, password, statement) {
        Ok(handle) => {
            // SAFETY: checked non-null; module owns the slot.
            unsafe { *out_result = handle };
            status::OK
        }
        Err(code) => code,
    }
}

unsafe extern "C" fn svc_result_next_row(ctx: *mut c_void, result: u64) -> i32 {
    // SAFETY: contract of the service table.
    let Some(host) = (unsafe { context(ctx) }) else {
        return status::BAD_ARGUMENT;
    };
    let mut cursors = lock(&host.cursors);
    let Some(c) = cursors.get_mut(&result) else {
        return status::BAD_HANDLE;
    };
    match c.dataset.rows.get(c.next) {
        Some(row) => {
            c.current = row.iter().map(|v| v.render()).collect();
            c.next += 1;
            status::ROW
        }
        None => {
            c.current.clear();
            status::DONE
        }
    }
}

unsafe extern "C" fn svc_result_column_text(ctx: *mut c_void, result: u64, index: u32, out: *mut HostStr) -> i32 {
    // SAFETY: contract of the service table.
    let Some(host) = (unsafe { context(ctx) }) else {
        return status::BAD_ARGUMENT;
    };
    if out.is_null() {
        return status::BAD_ARGUMENT;
    }
    let cursors = lock(&host.cursors);
    let Some(c) = cursors.get(&result) else {
        return status::BAD_HANDLE;
    };
    match c.current.get(index as usize) {
        None => status::NO_COLUMN,
        Some(None) => {
            // SAFETY: checked non-null.
            unsafe { *out = HostStr::EMPTY };
            status::NULL_VALUE
        }
        Some(Some(text)) => {
            // The heap buffer stays put until the row is replaced or the
            // handle closed, whatever happens to the map.
            // SAFETY: checked non-null.
            unsafe { *out = HostStr::new(text) };
            status::OK
        }
    }
}

unsafe extern "C" fn svc_result_close(ctx: *mut c_void, result: u64) {
    // SAFETY: contract of the service table.
    if let Some(host) = unsafe { context(ctx) } {
        host.close(result);
    }
}

unsafe extern "C" fn svc_log(ctx: *mut c_void, level: i32, message: HostStr) {
    // SAFETY: contract of the service table.
    if let Some(host) = unsafe { context(ctx) } {
        // SAFETY: message readable for the call.
        let bytes = unsafe { message.as_bytes() };
        host.record(LogLevel::from_i32(level), &String::from_utf8_lossy(bytes));
    }
}

unsafe extern "C" fn svc_host_version(_ctx: *mut c_void) -> i32 {
    HOST_VERSION
}

unsafe extern "C" fn svc_arg_count(ctx: *mut c_void) -> u32 {
    // SAFETY: contract of the service table.
    unsafe { context(ctx) }.map_or(0, |h| h.args.len() as u32)
}

unsafe extern "C" fn svc_arg_text(ctx: *mut c_void, index: u32, out: *mut HostStr) -> i32 {
    // SAFETY: contract of the service table.
    let Some(host) = (unsafe { context(ctx) }) else {
        return status::BAD_ARGUMENT;
    };
    if out.is_null() {
        return status::BAD_ARGUMENT;
    }
    match host.args.get(index as usize) {
        Some(a) => {
            // SAFETY: checked non-null; args live as long as the context.
            unsafe { *out = HostStr::new(a) };
            status::OK
        }
        None => status::NO_COLUMN,
    }
}

/// [`Host`] implemented straight over the kernel, without the service
/// table. Used by the CLI's built-in ingest and to compare a module's
/// in-process behaviour with its dynamically loaded behaviour.
pub struct KernelHost {
    kernel: Arc<Kernel>,
    args: Vec<String>,
    log: Mutex<Vec<(LogLevel, String)>>,
}

impl KernelHost {
    pub fn new(kernel: Arc<Kernel>, args: Vec<String>) -> Self {
        KernelHost {
            kernel,
            args,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn take_log(&self) -> Vec<(LogLevel, String)> {
        std::mem::take(&mut *lock(&self.log))
    }
}

impl Host for KernelHost {
    fn execute_sql(&self, path: &str, user: &str, password: &str, statement: &str) -> Result<Vec<TextRow>, HostError> {
        let key = SessionKey::new(PathBuf::from(path), user);
        let outcome = self.kernel.execute(&key, password, statement).map_err(|_| HostError {
            code: status::KERNEL_ERROR,
        })?;
        if let Some(e) = outcome.error {
            return Err(HostError { code: e.code() });
        }
        Ok(outcome
            .dataset
            .rows
            .iter()
            .map(|r| r.iter().map(|v| v.render()).collect())
            .collect())
    }

    fn log(&self, level: LogLevel, message: &str) {
        lock(&self.log).push((level, message.to_string()));
    }

    fn args(&self) -> Vec<String> {
        self.args.clone()
    }
}
