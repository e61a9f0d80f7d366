//! Sample data plug: loads a delimited text file into a database table.
//!
//! Activation arguments (after the activating user):
//! `<source> <database> <table> [--delim <c>] [--no-header]`.

use std::ffi::c_void;

use ibdwb_core::abi::{self, HostServices};
use ibdwb_core::host::{Connection, Host, LogLevel};
use ibdwb_core::ingest::{convert_delimited, ConvertError};

pub const USAGE: i32 = 1;
pub const EMPTY_INPUT: i32 = 2;
pub const RAGGED_ROW: i32 = 3;
pub const TARGET_EXISTS: i32 = 4;
pub const READ_FAILED: i32 = 5;
pub const HOST_FAILED: i32 = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub user: String,
    pub source: String,
    pub database: String,
    pub table: String,
    pub delimiter: char,
    pub has_header: bool,
}

pub fn parse_args(args: &[String]) -> Result<Job, String> {
    let (user, rest) = args.split_first().ok_or("missing activating user")?;
    let mut positional = Vec::new();
    let mut delimiter = ',';
    let mut has_header = true;
    let mut it = rest.iter();
    while let Some(a) = it.next() {
        match a.as_str() {
            "--no-header" => has_header = false,
            "--delim" => {
                let d = it.next().ok_or("--delim needs a value")?;
                delimiter = parse_delimiter(d)?;
            }
            _ => positional.push(a.clone()),
        }
    }
    let [source, database, table] = <[String; 3]>::try_from(positional)
        .map_err(|_| "usage: <source> <database> <table> [--delim c] [--no-header]".to_string())?;
    Ok(Job {
        user: user.clone(),
        source,
        database,
        table,
        delimiter,
        has_header,
    })
}

pub fn parse_delimiter(s: &str) -> Result<char, String> {
    match s {
        "\\t" | "tab" => Ok('\t'),
        _ => {
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) if c != '"' && c != '\n' => Ok(c),
                _ => Err(format!("delimiter must be a single character, found {s:?}")),
            }
        }
    }
}

/// Runs a conversion job against `host` and returns the module status.
pub fn run(host: &dyn Host) -> i32 {
    let job = match parse_args(&host.args()) {
        Ok(j) => j,
        Err(e) => {
            host.log(LogLevel::Error, &e);
            return USAGE;
        }
    };
    let text = match std::fs::read_to_string(&job.source) {
        Ok(t) => t,
        Err(e) => {
            host.log(LogLevel::Error, &format!("cannot read {}: {e}", job.source));
            return READ_FAILED;
        }
    };
    let conn = Connection {
        host,
        path: &job.database,
        user: &job.user,
        password: "",
    };
    match convert_delimited(&text, job.delimiter, job.has_header, &conn, &job.table) {
        Ok(n) => {
            host.log(LogLevel::Info, &format!("loaded {n} rows into {}", job.table.to_ascii_uppercase()));
            0
        }
        Err(e) => {
            host.log(LogLevel::Error, &e.to_string());
            match e {
                ConvertError::EmptyInput => EMPTY_INPUT,
                ConvertError::RaggedRow { .. } | ConvertError::UnterminatedQuote { .. } => RAGGED_ROW,
                ConvertError::TargetExists(_) => TARGET_EXISTS,
                ConvertError::Host(_) => HOST_FAILED,
            }
        }
    }
}

/// # Safety
/// Called by the module host with the arguments of the entry contract.
#[no_mangle]
pub unsafe extern "C" fn TOOLMAIN(
    ctx: *mut c_void,
    services: *const HostServices,
    init: *const u8,
    init_len: usize,
) -> i32 {
    // SAFETY: arguments forwarded unchanged from the host.
    unsafe { abi::enter(ctx, services, init, init_len, |host, _init| run(host)) }
}
