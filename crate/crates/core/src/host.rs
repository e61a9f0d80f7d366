use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::abi::status;

/// One result row as text; `None` is SQL NULL.
pub type TextRow = Vec<Option<String>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum LogLevel {
    Error = 1,
    Warn = 2,
    Info = 3,
    Debug = 4,
}

impl LogLevel {
    pub fn from_i32(level: i32) -> Self {
        match level {
            1 => LogLevel::Error,
            2 => LogLevel::Warn,
            3 => LogLevel::Info,
            _ => LogLevel::Debug,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HostError {
    pub code: i32,
}

impl fmt::Display for HostError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.code {
            status::PARSE_ERROR => "statement does not parse",
            status::UNKNOWN_TABLE => "unknown table",
            status::UNKNOWN_COLUMN => "unknown column",
            status::TYPE_MISMATCH => "type mismatch",
            status::DUPLICATE_KEY => "duplicate key",
            status::NULL_VIOLATION => "NULL violation",
            status::TABLE_EXISTS => "table already exists",
            status::KERNEL_ERROR => "kernel refused the request",
            _ => "host call failed",
        };
        write!(f, "{what} (status {})", self.code)
    }
}

/// What a module can ask of the host. Implemented over the service table
/// for real libraries and directly over the kernel for linked-in use.
pub trait Host {
    fn execute_sql(&self, path: &str, user: &str, password: &str, statement: &str) -> Result<Vec<TextRow>, HostError>;
    fn log(&self, level: LogLevel, message: &str);
    fn args(&self) -> Vec<String>;
}

/// A host plus the identity a module uses for its database requests.
pub struct Connection<'a> {
    pub host: &'a dyn Host,
    pub path: &'a str,
    pub user: &'a str,
    pub password: &'a str,
}

impl Connection<'_> {
    pub fn execute(&self, statement: &str) -> Result<Vec<TextRow>, HostError> {
        self.host.execute_sql(self.path, self.user, self.password, statement)
    }
}
