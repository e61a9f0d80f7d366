//! Canonical text for statements and expressions. Printing a parsed
//! statement and parsing the text again yields an equal tree.

use alloc::string::String;
use core::fmt::Write;

use super::ast::*;
use crate::value::{format_double, Value};

const PRIMARY: u8 = 8;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => op.precedence(),
        Expr::Not(_) => NOT_PRECEDENCE,
        Expr::Neg(_) => NEG_PRECEDENCE,
        _ => PRIMARY,
    }
}

pub fn literal_to_string(v: &Value) -> String {
    match v {
        Value::Null => "NULL".into(),
        Value::Int(i) => alloc::format!("{i}"),
        Value::Double(d) => format_double(*d),
        Value::Text(s) => quote(s),
    }
}

/// Single-quoted SQL string literal.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        if c == '\'' {
            out.push('\'');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_wrapped(out: &mut String, e: &Expr, wrap: bool) {
    if wrap {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Literal(v) => out.push_str(&literal_to_string(v)),
        Expr::Column(c) => out.push_str(c),
        Expr::Neg(inner) => {
            out.push('-');
            let wrap = !matches!(**inner, Expr::Column(_) | Expr::Aggregate { .. });
            write_wrapped(out, inner, wrap);
        }
        Expr::Not(inner) => {
            out.push_str("NOT ");
            write_wrapped(out, inner, precedence(inner) < NOT_PRECEDENCE);
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let lp = precedence(lhs);
            write_wrapped(out, lhs, lp < p || (op.is_comparison() && lp == p));
            let _ = write!(out, " {} ", op.symbol());
            write_wrapped(out, rhs, precedence(rhs) <= p);
        }
        Expr::Aggregate { func, arg } => {
            out.push_str(func.name());
            out.push('(');
            match arg {
                Some(a) => write_expr(out, a),
                None => out.push('*'),
            }
            out.push(')');
        }
    }
}

pub fn statement_to_string(stmt: &Statement) -> String {
    let mut s = String::new();
    match stmt {
        Statement::Select(sel) => {
            s.push_str("SELECT ");
            if sel.distinct {
                s.push_str("DISTINCT ");
            }
            match &sel.items {
                SelectItems::Star => s.push('*'),
                SelectItems::List(items) => {
                    for (i, item) in items.iter().enumerate() {
                        if i > 0 {
                            s.push_str(", ");
                        }
                        write_expr(&mut s, &item.expr);
                        if let Some(a) = &item.alias {
                            let _ = write!(s, " AS {a}");
                        }
                    }
                }
            }
            let _ = write!(s, " FROM {}", sel.table);
            if let Some(w) = &sel.where_clause {
                s.push_str(" WHERE ");
                write_expr(&mut s, w);
            }
            if !sel.group_by.is_empty() {
                let _ = write!(s, " GROUP BY {}", sel.group_by.join(", "));
            }
            for (i, o) in sel.order_by.iter().enumerate() {
                s.push_str(if i == 0 { " ORDER BY " } else { ", " });
                match &o.key {
                    OrderKey::Column(c) => s.push_str(c),
                    OrderKey::Ordinal(n) => {
                        let _ = write!(s, "{n}");
                    }
                }
                if o.descending {
                    s.push_str(" DESC");
                }
            }
        }
        Statement::CreateTable(c) => {
            let _ = write!(s, "CREATE TABLE {} (", c.name);
            for (i, col) in c.columns.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                let _ = write!(s, "{} {}", col.name, col.ty);
                if !col.nullable {
                    s.push_str(" NOT NULL");
                }
            }
            if let Some(pk) = &c.primary_key {
                let _ = write!(s, ", PRIMARY KEY ({pk})");
            }
            s.push(')');
        }
        Statement::DropTable(t) => {
            let _ = write!(s, "DROP TABLE {t}");
        }
        Statement::Insert(ins) => {
            let _ = write!(s, "INSERT INTO {}", ins.table);
            if let Some(cols) = &ins.columns {
                let _ = write!(s, " ({})", cols.join(", "));
            }
            s.push_str(" VALUES (");
            for (i, v) in ins.values.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                s.push_str(&literal_to_string(v));
            }
            s.push(')');
        }
        Statement::Delete(d) => {
            let _ = write!(s, "DELETE FROM {}", d.table);
            if let Some(w) = &d.where_clause {
                s.push_str(" WHERE ");
                write_expr(&mut s, w);
            }
        }
    }
    s
}
