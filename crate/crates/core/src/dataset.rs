use alloc::string::String;
use alloc::vec::Vec;

use crate::error::SqlError;
use crate::schema::Row;

/// A result relation together with the statement that produced it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataSet {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub statement: String,
}

impl DataSet {
    /// A fresh DataSet holds no rows.
    pub fn empty(statement: impl Into<String>) -> Self {
        DataSet {
            columns: Vec::new(),
            rows: Vec::new(),
            statement: statement.into(),
        }
    }
}

/// Result of running one statement: either a well-formed DataSet or an
/// error, never both.
#[derive(Debug, Clone, PartialEq)]
pub struct SqlOutcome {
    pub success: bool,
    pub dataset: DataSet,
    pub error: Option<SqlError>,
}

impl SqlOutcome {
    pub fn ok(dataset: DataSet) -> Self {
        SqlOutcome {
            success: true,
            dataset,
            error: None,
        }
    }

    pub fn failed(statement: &str, error: SqlError) -> Self {
        SqlOutcome {
            success: false,
            dataset: DataSet::empty(statement),
            error: Some(error),
        }
    }

    pub fn into_result(self) -> Result<DataSet, SqlError> {
        match self.error {
            None => Ok(self.dataset),
            Some(e) => Err(e),
        }
    }
}
