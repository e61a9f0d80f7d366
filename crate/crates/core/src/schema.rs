use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::SqlError;
use crate::value::{ColumnType, Value, MAX_VARCHAR};

pub type Row = Vec<Value>;

/// All tables of one database, keyed by upper-case name. Tables are shared
/// so a snapshot is a cheap clone of the map.
pub type Tables = BTreeMap<String, Arc<Table>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: String,
    pub ty: ColumnType,
    pub nullable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    pub primary_key: Option<String>,
}

impl TableSchema {
    /// Checks the schema invariants and returns it with the primary key
    /// column forced NOT NULL.
    pub fn new(
        name: String,
        mut columns: Vec<ColumnDef>,
        primary_key: Option<String>,
    ) -> Result<Self, SqlError> {
        if !is_identifier(&name) {
            return Err(SqlError::InvalidSchema(alloc::format!("bad table name {name:?}")));
        }
        if columns.is_empty() {
            return Err(SqlError::InvalidSchema("table needs at least one column".into()));
        }
        for (i, c) in columns.iter().enumerate() {
            if !is_identifier(&c.name) {
                return Err(SqlError::InvalidSchema(alloc::format!("bad column name {:?}", c.name)));
            }
            if columns[..i].iter().any(|p| p.name == c.name) {
                return Err(SqlError::InvalidSchema(alloc::format!("duplicate column {}", c.name)));
            }
            if let ColumnType::Varchar(n) = c.ty {
                if n == 0 || n > MAX_VARCHAR {
                    return Err(SqlError::InvalidSchema(alloc::format!(
                        "VARCHAR length {n} outside 1..={MAX_VARCHAR}"
                    )));
                }
            }
        }
        if let Some(pk) = &primary_key {
            match columns.iter_mut().find(|c| &c.name == pk) {
                Some(c) => c.nullable = false,
                None => {
                    return Err(SqlError::InvalidSchema(alloc::format!(
                        "primary key {pk} is not a column"
                    )))
                }
            }
        }
        Ok(TableSchema {
            name,
            columns,
            primary_key,
        })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn primary_key_index(&self) -> Option<usize> {
        self.primary_key.as_deref().and_then(|pk| self.column_index(pk))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: TableSchema,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(schema: TableSchema) -> Self {
        Table {
            schema,
            rows: Vec::new(),
        }
    }

    /// Coerces and validates a full row against the schema and the
    /// primary key, without touching the table.
    pub fn check_row(&self, mut row: Row) -> Result<Row, SqlError> {
        let schema = &self.schema;
        if row.len() != schema.columns.len() {
            return Err(SqlError::ArityMismatch {
                expected: schema.columns.len(),
                found: row.len(),
            });
        }
        for (value, col) in row.iter_mut().zip(&schema.columns) {
            *value = coerce(core::mem::replace(value, Value::Null), col, &schema.name)?;
        }
        if let Some(pk) = schema.primary_key_index() {
            if self.rows.iter().any(|r| r[pk] == row[pk]) {
                return Err(SqlError::DuplicateKey {
                    table: schema.name.clone(),
                    column: schema.columns[pk].name.clone(),
                });
            }
        }
        Ok(row)
    }
}

fn coerce(value: Value, col: &ColumnDef, table: &str) -> Result<Value, SqlError> {
    let mismatch = |v: &Value| {
        SqlError::TypeMismatch(alloc::format!("cannot store {v} in {} {}", col.ty, col.name))
    };
    match (col.ty, value) {
        (_, Value::Null) if col.nullable => Ok(Value::Null),
        (_, Value::Null) => Err(SqlError::NullViolation {
            table: table.into(),
            column: col.name.clone(),
        }),
        (ColumnType::Integer, v @ Value::Int(_)) => Ok(v),
        (ColumnType::Double, Value::Int(i)) => Ok(Value::Double(i as f64)),
        (ColumnType::Double, v @ Value::Double(_)) => Ok(v),
        (ColumnType::Varchar(n), Value::Text(s)) => {
            if s.len() > n as usize {
                Err(SqlError::ValueTooLong {
                    column: col.name.clone(),
                    max: n,
                })
            } else {
                Ok(Value::Text(s))
            }
        }
        (_, v) => Err(mismatch(&v)),
    }
}

/// Unquoted identifier: ASCII letter or underscore, then letters, digits
/// or underscores.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Identifiers compare case-insensitively and are stored upper-case.
pub fn normalize_ident(s: &str) -> String {
    s.to_ascii_uppercase()
}
