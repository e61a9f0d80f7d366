use alloc::string::String;
use core::fmt;

use crate::abi::status;

/// Failure of a single statement. Carried inside an unsuccessful
/// [`SqlOutcome`](crate::SqlOutcome).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SqlError {
    /// The text is not a statement of the supported grammar.
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    UnknownTable(String),
    UnknownColumn(String),
    TypeMismatch(String),
    DuplicateKey { table: String, column: String },
    NullViolation { table: String, column: String },
    TableExists(String),
    ValueTooLong { column: String, max: u32 },
    ArityMismatch { expected: usize, found: usize },
    InvalidSchema(String),
    NumericOverflow,
    ReadOnlyTransaction,
}

impl SqlError {
    pub fn parse(line: usize, col: usize, message: impl Into<String>) -> Self {
        SqlError::Parse {
            line,
            col,
            message: message.into(),
        }
    }

    /// Status code reported across the plugin boundary.
    pub fn code(&self) -> i32 {
        match self {
            SqlError::Parse { .. } => status::PARSE_ERROR,
            SqlError::UnknownTable(_) => status::UNKNOWN_TABLE,
            SqlError::UnknownColumn(_) => status::UNKNOWN_COLUMN,
            SqlError::TypeMismatch(_) => status::TYPE_MISMATCH,
            SqlError::DuplicateKey { .. } => status::DUPLICATE_KEY,
            SqlError::NullViolation { .. } => status::NULL_VIOLATION,
            SqlError::TableExists(_) => status::TABLE_EXISTS,
            _ => status::SQL_FAILED,
        }
    }
}

impl fmt::Display for SqlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SqlError::Parse { line, col, message } => {
                write!(f, "PARSE ERROR line {line} col {col}: {message}")
            }
            SqlError::UnknownTable(t) => write!(f, "unknown table: {t}"),
            SqlError::UnknownColumn(c) => write!(f, "unknown column: {c}"),
            SqlError::TypeMismatch(m) => write!(f, "type mismatch: {m}"),
            SqlError::DuplicateKey { table, column } => {
                write!(f, "duplicate key in {table}.{column}")
            }
            SqlError::NullViolation { table, column } => {
                write!(f, "NULL not allowed in {table}.{column}")
            }
            SqlError::TableExists(t) => write!(f, "table already exists: {t}"),
            SqlError::ValueTooLong { column, max } => {
                write!(f, "value too long for {column} (max {max} bytes)")
            }
            SqlError::ArityMismatch { expected, found } => {
                write!(f, "expected {expected} values, found {found}")
            }
            SqlError::InvalidSchema(m) => write!(f, "invalid schema: {m}"),
            SqlError::NumericOverflow => f.write_str("numeric overflow"),
            SqlError::ReadOnlyTransaction => f.write_str("statement requires a WRITE transaction"),
        }
    }
}

impl core::error::Error for SqlError {}
