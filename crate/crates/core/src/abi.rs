//! Foreign-function contract between the host and module libraries.
//!
//! A module exports `TOOLMAIN` (tools) or `WIZARDMAIN` (wizards) with the
//! signature of [`EntryFn`]. The host calls it on the activating thread
//! with an opaque context, a pointer to [`HostServices`] and the module's
//! initialization string (empty for tools), and regains control only when
//! the entry returns. A status of 0 means success.
//!
//! Every service takes the context as its first argument. Strings cross
//! the boundary as [`HostStr`] (pointer + byte length, UTF-8, not
//! NUL-terminated); strings handed out by the host stay valid until the
//! next call on the same result handle or argument index.
//!
//! Activation arguments are available through `arg_count`/`arg_text`;
//! argument 0 is the activating user.

use alloc::string::String;
use alloc::vec::Vec;
use core::ffi::c_void;

use crate::host::{Host, HostError, LogLevel, TextRow};

pub const INTERFACE_VERSION: i32 = 1;

/// Status codes shared by services and entry points.
pub mod status {
    pub const OK: i32 = 0;
    /// `result_column_text`: the value is NULL.
    pub const NULL_VALUE: i32 = 1;
    /// `result_next_row`: a row is available.
    pub const ROW: i32 = 1;
    /// `result_next_row`: no more rows.
    pub const DONE: i32 = 0;

    pub const PARSE_ERROR: i32 = -10;
    pub const UNKNOWN_TABLE: i32 = -11;
    pub const UNKNOWN_COLUMN: i32 = -12;
    pub const TYPE_MISMATCH: i32 = -13;
    pub const DUPLICATE_KEY: i32 = -14;
    pub const NULL_VIOLATION: i32 = -15;
    pub const TABLE_EXISTS: i32 = -16;
    pub const SQL_FAILED: i32 = -19;
    /// The kernel refused the request (transaction cap, missing database).
    pub const KERNEL_ERROR: i32 = -20;
    pub const BAD_ARGUMENT: i32 = -30;
    pub const BAD_HANDLE: i32 = -31;
    pub const NO_COLUMN: i32 = -32;
    pub const INTERFACE_MISMATCH: i32 = -40;
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HostStr {
    pub ptr: *const u8,
    pub len: usize,
}

impl HostStr {
    pub const EMPTY: HostStr = HostStr {
        ptr: core::ptr::null(),
        len: 0,
    };

    pub fn new(s: &str) -> Self {
        HostStr {
            ptr: s.as_ptr(),
            len: s.len(),
        }
    }

    /// # Safety
    /// `ptr` must point to `len` readable bytes that outlive `'a`.
    pub unsafe fn as_bytes<'a>(self) -> &'a [u8] {
        if self.ptr.is_null() || self.len == 0 {
            &[]
        } else {
            // SAFETY: guaranteed by the caller.
            unsafe { core::slice::from_raw_parts(self.ptr, self.len) }
        }
    }

    /// # Safety
    /// As [`HostStr::as_bytes`].
    pub unsafe fn as_str<'a>(self) -> Option<&'a str> {
        // SAFETY: forwarded.
        core::str::from_utf8(unsafe { self.as_bytes() }).ok()
    }
}

pub type ExecuteSqlFn = unsafe extern "C" fn(
    ctx: *mut c_void,
    path: HostStr,
    user: HostStr,
    password: HostStr,
    statement: HostStr,
    out_result: *mut u64,
) -> i32;
pub type ResultNextRowFn = unsafe extern "C" fn(ctx: *mut c_void, result: u64) -> i32;
pub type ResultColumnTextFn = unsafe extern "C" fn(ctx: *mut c_void, result: u64, index: u32, out: *mut HostStr) -> i32;
pub type ResultCloseFn = unsafe extern "C" fn(ctx: *mut c_void, result: u64);
pub type LogFn = unsafe extern "C" fn(ctx: *mut c_void, level: i32, message: HostStr);
pub type HostVersionFn = unsafe extern "C" fn(ctx: *mut c_void) -> i32;
pub type ArgCountFn = unsafe extern "C" fn(ctx: *mut c_void) -> u32;
pub type ArgTextFn = unsafe extern "C" fn(ctx: *mut c_void, index: u32, out: *mut HostStr) -> i32;

/// Table of host entry points handed to every module.
#[repr(C)]
pub struct HostServices {
    pub interface_version: i32,
    pub execute_sql: ExecuteSqlFn,
    pub result_next_row: ResultNextRowFn,
    pub result_column_text: ResultColumnTextFn,
    pub result_close: ResultCloseFn,
    pub log: LogFn,
    pub host_version: HostVersionFn,
    pub arg_count: ArgCountFn,
    pub arg_text: ArgTextFn,
}

pub type EntryFn = unsafe extern "C" fn(
    ctx: *mut c_void,
    services: *const HostServices,
    init: *const u8,
    init_len: usize,
) -> i32;

/// Module-side view of the host through the service table.
pub struct FfiHost<'a> {
    ctx: *mut c_void,
    services: &'a HostServices,
}

impl<'a> FfiHost<'a> {
    /// # Safety
    /// `ctx` and `services` must be the values the host passed to the
    /// entry point currently executing.
    pub unsafe fn new(ctx: *mut c_void, services: &'a HostServices) -> Self {
        FfiHost { ctx, services }
    }

    pub fn host_version(&self) -> i32 {
        // SAFETY: service table supplied by the host for this activation.
        unsafe { (self.services.host_version)(self.ctx) }
    }
}

impl Host for FfiHost<'_> {
    fn execute_sql(&self, path: &str, user: &str, password: &str, statement: &str) -> Result<Vec<TextRow>, HostError> {
        let s = self.services;
        let mut handle = 0u64;
        // SAFETY: all strings outlive the call; handle is a valid out slot.
        let rc = unsafe {
            (s.execute_sql)(
                self.ctx,
                HostStr::new(path),
                HostStr::new(user),
                HostStr::new(password),
                HostStr::new(statement),
                &mut handle,
            )
        };
        if rc != status::OK {
            return Err(HostError { code: rc });
        }
        let mut rows = Vec::new();
        let result = loop {
            // SAFETY: handle was returned by execute_sql and is still open.
            match unsafe { (s.result_next_row)(self.ctx, handle) } {
                status::DONE => break Ok(rows),
                status::ROW => {}
                code => break Err(HostError { code }),
            }
            let mut row = TextRow::new();
            for index in 0u32.. {
                let mut out = HostStr::EMPTY;
                // SAFETY: as above; out is a valid slot.
                let rc = unsafe { (s.result_column_text)(self.ctx, handle, index, &mut out) };
                match rc {
                    status::OK => {
                        // SAFETY: host keeps the text alive until the next call.
                        let text = unsafe { out.as_str() }.unwrap_or_default();
                        row.push(Some(String::from(text)));
                    }
                    status::NULL_VALUE => row.push(None),
                    status::NO_COLUMN => break,
                    _ => break,
                }
            }
            rows.push(row);
        };
        // SAFETY: closing the handle obtained above exactly once.
        unsafe { (s.result_close)(self.ctx, handle) };
        result
    }

    fn log(&self, level: LogLevel, message: &str) {
        // SAFETY: message outlives the call.
        unsafe { (self.services.log)(self.ctx, level as i32, HostStr::new(message)) }
    }

    fn args(&self) -> Vec<String> {
        let s = self.services;
        // SAFETY: service table supplied by the host.
        let n = unsafe { (s.arg_count)(self.ctx) };
        (0..n)
            .map(|i| {
                let mut out = HostStr::EMPTY;
                // SAFETY: index below arg_count; out is a valid slot.
                unsafe {
                    (s.arg_text)(self.ctx, i, &mut out);
                    String::from(out.as_str().unwrap_or_default())
                }
            })
            .collect()
    }
}

/// Common prologue for module entry points: checks the interface version,
/// decodes the init string and runs `body` against the host.
///
/// # Safety
/// Arguments must be exactly those received by the exported entry.
pub unsafe fn enter(
    ctx: *mut c_void,
    services: *const HostServices,
    init: *const u8,
    init_len: usize,
    body: impl FnOnce(&FfiHost<'_>, &str) -> i32,
) -> i32 {
    // SAFETY: host passes a valid table for the duration of the call.
    let Some(services) = (unsafe { services.as_ref() }) else {
        return status::BAD_ARGUMENT;
    };
    if services.interface_version != INTERFACE_VERSION {
        return status::INTERFACE_MISMATCH;
    }
    // SAFETY: host passes init_len readable bytes.
    let init = unsafe { HostStr { ptr: init, len: init_len }.as_str() };
    let Some(init) = init else {
        return status::BAD_ARGUMENT;
    };
    // SAFETY: ctx/services come straight from the entry arguments.
    let host = unsafe { FfiHost::new(ctx, services) };
    body(&host, init)
}
