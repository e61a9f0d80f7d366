//! Text encoding of the on-disk database directory.
//!
//! * `db.manifest`: first line `IBDWB-DB v1`, then one table name per line.
//! * `<TABLE>.schema`: `NAME<TAB>TYPE<TAB>NULL|NOTNULL` per column, then an
//!   optional `PRIMARYKEY<TAB>NAME` line.
//! * `<TABLE>.rows`: one row per line, tab-separated, with `\\`, `\t` and
//!   `\n` escapes and `\N` for NULL.
//!
//! All files are UTF-8 with `\n` line endings.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::schema::{ColumnDef, Row, TableSchema};
use crate::value::{format_double, ColumnType, Value};

pub const MANIFEST_MAGIC: &str = "IBDWB-DB v1";
pub const MANIFEST_FILE: &str = "db.manifest";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodecError(pub String);

impl fmt::Display for CodecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn err(msg: impl Into<String>) -> CodecError {
    CodecError(msg.into())
}

pub fn schema_file(table: &str) -> String {
    alloc::format!("{table}.schema")
}

pub fn rows_file(table: &str) -> String {
    alloc::format!("{table}.rows")
}

pub fn encode_manifest<'a>(tables: impl IntoIterator<Item = &'a str>) -> String {
    let mut s = String::from(MANIFEST_MAGIC);
    s.push('\n');
    for t in tables {
        s.push_str(t);
        s.push('\n');
    }
    s
}

pub fn decode_manifest(text: &str) -> Result<Vec<String>, CodecError> {
    let mut lines = text.lines();
    if lines.next() != Some(MANIFEST_MAGIC) {
        return Err(err("missing IBDWB-DB v1 header"));
    }
    Ok(lines.filter(|l| !l.is_empty()).map(ToString::to_string).collect())
}

pub fn encode_schema(schema: &TableSchema) -> String {
    let mut s = String::new();
    for c in &schema.columns {
        s.push_str(&alloc::format!(
            "{}\t{}\t{}\n",
            c.name,
            c.ty,
            if c.nullable { "NULL" } else { "NOTNULL" }
        ));
    }
    if let Some(pk) = &schema.primary_key {
        s.push_str(&alloc::format!("PRIMARYKEY\t{pk}\n"));
    }
    s
}

pub fn parse_column_type(s: &str) -> Option<ColumnType> {
    match s {
        "INTEGER" => Some(ColumnType::Integer),
        "DOUBLE" => Some(ColumnType::Double),
        _ => {
            let n = s.strip_prefix("VARCHAR(")?.strip_suffix(')')?;
            n.parse().ok().map(ColumnType::Varchar)
        }
    }
}

pub fn decode_schema(table: &str, text: &str) -> Result<TableSchema, CodecError> {
    let mut columns = Vec::new();
    let mut pk = None;
    for line in text.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            ["PRIMARYKEY", name] if pk.is_none() => pk = Some((*name).to_string()),
            [name, ty, null] if pk.is_none() => {
                let ty = parse_column_type(ty).ok_or_else(|| err(alloc::format!("bad column type {ty:?}")))?;
                let nullable = match *null {
                    "NULL" => true,
                    "NOTNULL" => false,
                    other => return Err(err(alloc::format!("bad nullability {other:?}"))),
                };
                columns.push(ColumnDef {
                    name: (*name).to_string(),
                    ty,
                    nullable,
                });
            }
            _ => return Err(err(alloc::format!("bad schema line {line:?} in {table}"))),
        }
    }
    TableSchema::new(table.to_string(), columns, pk).map_err(|e| err(e.to_string()))
}

fn escape_into(out: &mut String, s: &str) {
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
}

fn unescape(s: &str) -> Result<String, CodecError> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            other => return Err(err(alloc::format!("bad escape \\{other:?}"))),
        }
    }
    Ok(out)
}

pub fn encode_rows(rows: &[Row]) -> String {
    let mut s = String::new();
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                s.push('\t');
            }
            match v {
                Value::Null => s.push_str("\\N"),
                Value::Int(n) => s.push_str(&n.to_string()),
                Value::Double(d) => s.push_str(&format_double(*d)),
                Value::Text(t) => escape_into(&mut s, t),
            }
        }
        s.push('\n');
    }
    s
}

pub fn decode_rows(schema: &TableSchema, text: &str) -> Result<Vec<Row>, CodecError> {
    let mut rows = Vec::new();
    if text.is_empty() {
        return Ok(rows);
    }
    let body = text
        .strip_suffix('\n')
        .ok_or_else(|| err("rows file does not end with a newline"))?;
    for (n, line) in body.split('\n').enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != schema.columns.len() {
            return Err(err(alloc::format!(
                "{}: row {} has {} fields, expected {}",
                schema.name,
                n + 1,
                fields.len(),
                schema.columns.len()
            )));
        }
        let mut row = Vec::with_capacity(fields.len());
        for (f, col) in fields.iter().zip(&schema.columns) {
            let v = if *f == "\\N" {
                Value::Null
            } else {
                match col.ty {
                    ColumnType::Integer => Value::Int(f.parse().map_err(|_| err(alloc::format!("bad INTEGER {f:?}")))?),
                    ColumnType::Double => Value::Double(f.parse().map_err(|_| err(alloc::format!("bad DOUBLE {f:?}")))?),
                    ColumnType::Varchar(_) => Value::Text(unescape(f)?),
                }
            };
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}
