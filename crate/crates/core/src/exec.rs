//! Statement execution against an in-memory table set.
//!
//! Every statement validates completely before it mutates anything, so a
//! failed statement leaves `tables` exactly as it found them.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::dataset::{DataSet, SqlOutcome};
use crate::error::SqlError;
use crate::eval::{evaluate_select, Predicate};
use crate::schema::{Row, Table, TableSchema, Tables};
use crate::sql::{parse_statement, Statement};
use crate::value::Value;

/// Parses and executes one statement. `writable` is false inside READ
/// transactions, where only SELECT is allowed.
pub fn run_statement(text: &str, tables: &mut Tables, writable: bool) -> SqlOutcome {
    match parse_statement(text).and_then(|stmt| execute(&stmt, text, tables, writable)) {
        Ok(ds) => SqlOutcome::ok(ds),
        Err(e) => SqlOutcome::failed(text, e),
    }
}

pub fn execute(stmt: &Statement, text: &str, tables: &mut Tables, writable: bool) -> Result<DataSet, SqlError> {
    if stmt.is_write() && !writable {
        return Err(SqlError::ReadOnlyTransaction);
    }
    match stmt {
        Statement::Select(sel) => {
            let table = lookup(tables, &sel.table)?;
            evaluate_select(sel, table, text)
        }
        Statement::CreateTable(c) => {
            if tables.contains_key(&c.name) {
                return Err(SqlError::TableExists(c.name.clone()));
            }
            let schema = TableSchema::new(c.name.clone(), c.columns.clone(), c.primary_key.clone())?;
            tables.insert(c.name.clone(), Arc::new(Table::new(schema)));
            Ok(DataSet::empty(text))
        }
        Statement::DropTable(name) => {
            tables
                .remove(name)
                .ok_or_else(|| SqlError::UnknownTable(name.clone()))?;
            Ok(DataSet::empty(text))
        }
        Statement::Insert(ins) => {
            let table = lookup(tables, &ins.table)?;
            let row = match &ins.columns {
                None => ins.values.clone(),
                Some(cols) => {
                    if cols.len() != ins.values.len() {
                        return Err(SqlError::ArityMismatch {
                            expected: cols.len(),
                            found: ins.values.len(),
                        });
                    }
                    let mut row: Row = alloc::vec![Value::Null; table.schema.columns.len()];
                    let mut assigned = alloc::vec![false; row.len()];
                    for (c, v) in cols.iter().zip(&ins.values) {
                        let i = table
                            .schema
                            .column_index(c)
                            .ok_or_else(|| SqlError::UnknownColumn(c.clone()))?;
                        if core::mem::replace(&mut assigned[i], true) {
                            return Err(SqlError::InvalidSchema(alloc::format!("column {c} listed twice")));
                        }
                        row[i] = v.clone();
                    }
                    row
                }
            };
            let row = table.check_row(row)?;
            let table = tables.get_mut(&ins.table).expect("looked up above");
            Arc::make_mut(table).rows.push(row);
            Ok(DataSet::empty(text))
        }
        Statement::Delete(del) => {
            let table = lookup(tables, &del.table)?;
            let keep: Vec<bool> = match &del.where_clause {
                None => alloc::vec![false; table.rows.len()],
                Some(w) => {
                    let p = Predicate::bind(w, &table.schema)?;
                    table
                        .rows
                        .iter()
                        .map(|r| p.matches(r).map(|m| !m))
                        .collect::<Result<_, _>>()?
                }
            };
            if keep.iter().any(|k| !k) {
                let table = Arc::make_mut(tables.get_mut(&del.table).expect("looked up above"));
                let mut flags = keep.into_iter();
                table.rows.retain(|_| flags.next().unwrap_or(true));
            }
            Ok(DataSet::empty(text))
        }
    }
}

fn lookup<'a>(tables: &'a Tables, name: &str) -> Result<&'a Table, SqlError> {
    tables
        .get(name)
        .map(|t| &**t)
        .ok_or_else(|| SqlError::UnknownTable(name.into()))
}
