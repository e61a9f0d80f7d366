//! Allocation-only core of the IB-DWB data-mart builder.
//!
//! Everything here is pure: the statement language (lexer, parser,
//! printer, evaluator), the in-memory table model and its text codec,
//! the module init-file parser, the plugin ABI, and the analysis
//! routines the sample modules run. File IO, transactions, sessions and
//! dynamic loading live in the `ibdwb` crate.

#![no_std]
#![deny(unsafe_op_in_unsafe_fn)]

extern crate alloc;

pub mod abi;
pub mod codec;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod exec;
pub mod host;
pub mod ingest;
pub mod initfile;
pub mod itemsets;
pub mod schema;
pub mod sql;
pub mod value;

pub use dataset::{DataSet, SqlOutcome};
pub use error::SqlError;
pub use schema::{ColumnDef, Table, TableSchema, Tables};
pub use value::{ColumnType, Value};
