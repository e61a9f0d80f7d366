//! Sample discoverer: frequent itemsets over a (transaction, item) table.
//!
//! Initialization string: `minsup <n>`. Activation arguments (after the
//! activating user): `<database> <table> <txn column> <item column>
//! [<output table>]`. Each itemset is logged; with an output table the
//! results are also stored as `ITEMS, SIZE, SUPPORT` rows.

use std::ffi::c_void;

use ibdwb_core::abi::{self, status, HostServices};
use ibdwb_core::host::{Connection, Host, HostError, LogLevel};
use ibdwb_core::itemsets::{frequent_itemsets, load_transactions, parse_minsup, ItemsetResult};
use ibdwb_core::sql::quote;

pub const USAGE: i32 = 1;
pub const BAD_INIT: i32 = 2;
pub const UNKNOWN_TABLE: i32 = 3;
pub const UNKNOWN_COLUMN: i32 = 4;
pub const HOST_FAILED: i32 = 6;

pub struct Job {
    pub user: String,
    pub database: String,
    pub table: String,
    pub txn_column: String,
    pub item_column: String,
    pub output: Option<String>,
}

pub fn parse_args(args: &[String]) -> Result<Job, String> {
    match args {
        [user, database, table, txn, item, rest @ ..] if rest.len() <= 1 => Ok(Job {
            user: user.clone(),
            database: database.clone(),
            table: table.clone(),
            txn_column: txn.clone(),
            item_column: item.clone(),
            output: rest.first().cloned(),
        }),
        _ => Err("usage: <database> <table> <txn column> <item column> [<output table>]".into()),
    }
}

/// Mines and reports itemsets; returns the results for in-process callers.
pub fn discover(host: &dyn Host, job: &Job, minsup: u64) -> Result<Vec<ItemsetResult>, HostError> {
    let conn = Connection {
        host,
        path: &job.database,
        user: &job.user,
        password: "",
    };
    let transactions = load_transactions(&conn, &job.table, &job.txn_column, &job.item_column)?;
    let found = frequent_itemsets(&transactions, minsup);
    for r in &found {
        host.log(LogLevel::Info, &r.to_string());
    }
    if let Some(out) = &job.output {
        conn.execute(&format!(
            "CREATE TABLE {out} (ITEMS VARCHAR(4096) NOT NULL, SIZE INTEGER NOT NULL, SUPPORT INTEGER NOT NULL)"
        ))?;
        for r in &found {
            conn.execute(&format!(
                "INSERT INTO {out} VALUES ({}, {}, {})",
                quote(&r.items.join(",")),
                r.items.len(),
                r.support
            ))?;
        }
    }
    Ok(found)
}

pub fn run(host: &dyn Host, init: &str) -> i32 {
    let Some(minsup) = parse_minsup(init) else {
        host.log(LogLevel::Error, &format!("initialization must be `minsup <n>`, found {init:?}"));
        return BAD_INIT;
    };
    let job = match parse_args(&host.args()) {
        Ok(j) => j,
        Err(e) => {
            host.log(LogLevel::Error, &e);
            return USAGE;
        }
    };
    match discover(host, &job, minsup) {
        Ok(_) => 0,
        Err(e) => {
            host.log(LogLevel::Error, &e.to_string());
            match e.code {
                status::UNKNOWN_TABLE => UNKNOWN_TABLE,
                status::UNKNOWN_COLUMN => UNKNOWN_COLUMN,
                _ => HOST_FAILED,
            }
        }
    }
}

/// # Safety
/// Called by the module host with the arguments of the entry contract.
#[no_mangle]
pub unsafe extern "C" fn WIZARDMAIN(
    ctx: *mut c_void,
    services: *const HostServices,
    init: *const u8,
    init_len: usize,
) -> i32 {
    // SAFETY: arguments forwarded unchanged from the host.
    unsafe { abi::enter(ctx, services, init, init_len, |host, init| run(host, init)) }
}
