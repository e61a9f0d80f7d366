//! Delimited-file conversion: record splitting with RFC-style quoting,
//! per-column type inference, and loading through a host connection.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::abi::status;
use crate::host::{Connection, HostError};
use crate::schema::is_identifier;
use crate::sql::lexer::is_reserved;
use crate::sql::quote;
use crate::value::ColumnType;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnGuess {
    pub name: String,
    pub inferred: ColumnType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConvertError {
    EmptyInput,
    /// 1-based record number, counting a header record.
    RaggedRow { record: usize, expected: usize, found: usize },
    UnterminatedQuote { record: usize },
    TargetExists(String),
    Host(HostError),
}

impl fmt::Display for ConvertError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvertError::EmptyInput => f.write_str("input has no records"),
            ConvertError::RaggedRow { record, expected, found } => {
                write!(f, "record {record} has {found} fields, expected {expected}")
            }
            ConvertError::UnterminatedQuote { record } => write!(f, "record {record} has an unterminated quote"),
            ConvertError::TargetExists(t) => write!(f, "target table {t} already exists"),
            ConvertError::Host(e) => write!(f, "{e}"),
        }
    }
}

/// Splits text into records of fields. Fields may be wrapped in double
/// quotes, inside which the delimiter and line breaks are literal and
/// `""` is a quote. Records end at `\n` or `\r\n`; a final empty line is
/// not a record.
pub fn split_records(text: &str, delimiter: char) -> Result<Vec<Vec<String>>, ConvertError> {
    let mut records = Vec::new();
    let mut record = Vec::new();
    let mut field = String::new();
    let mut chars = text.chars().peekable();
    let mut in_quotes = false;
    let mut at_field_start = true;
    let mut line_has_content = false;
    while let Some(c) = chars.next() {
        if in_quotes {
            if c == '"' {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    field.push('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push(c);
            }
            continue;
        }
        match c {
            '"' if at_field_start => {
                in_quotes = true;
                at_field_start = false;
                line_has_content = true;
            }
            c if c == delimiter => {
                record.push(core::mem::take(&mut field));
                at_field_start = true;
                line_has_content = true;
            }
            '\r' if chars.peek() == Some(&'\n') => {}
            '\n' => {
                if line_has_content {
                    record.push(core::mem::take(&mut field));
                    records.push(core::mem::take(&mut record));
                }
                at_field_start = true;
                line_has_content = false;
            }
            c => {
                field.push(c);
                at_field_start = false;
                line_has_content = true;
            }
        }
    }
    if in_quotes {
        return Err(ConvertError::UnterminatedQuote { record: records.len() + 1 });
    }
    if line_has_content {
        record.push(field);
        records.push(record);
    }
    Ok(records)
}

fn looks_numeric(s: &str) -> bool {
    s.chars().any(|c| c.is_ascii_digit())
        && s.chars().all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'))
}

/// INTEGER if every non-empty value parses as an integer, else DOUBLE if
/// every non-empty value is numeric, else VARCHAR(255).
pub fn infer_type<'a>(values: impl Iterator<Item = &'a str> + Clone) -> ColumnType {
    let mut non_empty = values.filter(|v| !v.is_empty());
    if non_empty.clone().all(|v| v.parse::<i64>().is_ok()) {
        ColumnType::Integer
    } else if non_empty.all(|v| looks_numeric(v) && v.parse::<f64>().is_ok()) {
        ColumnType::Double
    } else {
        ColumnType::Varchar(255)
    }
}

/// Turns a header cell into a usable column identifier.
pub fn column_name(raw: &str, position: usize, taken: &[ColumnGuess]) -> String {
    let mut name: String = raw
        .trim()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect();
    if name.is_empty() || name.chars().all(|c| c == '_') {
        name = format!("COL{position}");
    }
    if !is_identifier(&name) {
        name.insert(0, '_');
    }
    if is_reserved(&name) {
        name.push('_');
    }
    let base = name.clone();
    let mut n = 2;
    while taken.iter().any(|g| g.name == name) {
        name = format!("{base}_{n}");
        n += 1;
    }
    name
}

pub fn guess_columns(header: Option<&[String]>, data: &[Vec<String>], width: usize) -> Vec<ColumnGuess> {
    let mut guesses: Vec<ColumnGuess> = Vec::with_capacity(width);
    for i in 0..width {
        let name = match header {
            Some(h) => column_name(&h[i], i + 1, &guesses),
            None => format!("COL{}", i + 1),
        };
        let inferred = infer_type(data.iter().map(|r| r[i].as_str()));
        guesses.push(ColumnGuess { name, inferred });
    }
    guesses
}

fn sql_value(raw: &str, ty: ColumnType) -> String {
    if raw.is_empty() {
        return "NULL".into();
    }
    match ty {
        ColumnType::Integer => raw.parse::<i64>().map(|i| i.to_string()).unwrap_or_else(|_| quote(raw)),
        ColumnType::Double => raw
            .parse::<f64>()
            .map(crate::value::format_double)
            .unwrap_or_else(|_| quote(raw)),
        ColumnType::Varchar(_) => quote(raw),
    }
}

/// Creates `table` from delimited `text` and inserts one row per record.
/// Returns the number of rows inserted.
pub fn convert_delimited(
    text: &str,
    delimiter: char,
    has_header: bool,
    conn: &Connection<'_>,
    table: &str,
) -> Result<usize, ConvertError> {
    let mut records = split_records(text, delimiter)?;
    if records.is_empty() {
        return Err(ConvertError::EmptyInput);
    }
    let width = records[0].len();
    if let Some((i, r)) = records.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(ConvertError::RaggedRow {
            record: i + 1,
            expected: width,
            found: r.len(),
        });
    }
    let header = if has_header { Some(records.remove(0)) } else { None };
    let columns = guess_columns(header.as_deref(), &records, width);
    let table = table.to_ascii_uppercase();

    let defs: Vec<String> = columns.iter().map(|c| format!("{} {}", c.name, c.inferred)).collect();
    let create = format!("CREATE TABLE {table} ({})", defs.join(", "));
    conn.execute(&create).map_err(|e| {
        if e.code == status::TABLE_EXISTS {
            ConvertError::TargetExists(table.clone())
        } else {
            ConvertError::Host(e)
        }
    })?;
    for r in &records {
        let values: Vec<String> = r
            .iter()
            .zip(&columns)
            .map(|(v, c)| sql_value(v, c.inferred))
            .collect();
        conn.execute(&format!("INSERT INTO {table} VALUES ({})", values.join(", ")))
            .map_err(ConvertError::Host)?;
    }
    Ok(records.len())
}
