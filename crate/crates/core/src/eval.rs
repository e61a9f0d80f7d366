//! SELECT evaluation over one table.
//!
//! Expressions are first bound against the table schema (column indices
//! resolved, operand types checked) so that type errors surface before
//! any row is read. NULL logic is two-valued: a comparison involving
//! NULL is false, aggregates skip NULLs, and division by zero gives NULL.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::dataset::DataSet;
use crate::error::SqlError;
use crate::schema::{Row, Table, TableSchema};
use crate::sql::{output_name, AggFunc, BinaryOp, Expr, OrderKey, SelectItems, SelectStmt};
use crate::value::{ColumnType, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Int,
    Double,
    Text,
    Bool,
    /// Untyped NULL literal.
    Null,
}

impl Ty {
    fn numeric(self) -> bool {
        matches!(self, Ty::Int | Ty::Double | Ty::Null)
    }
}

#[derive(Debug, Clone)]
enum Bound {
    Lit(Value),
    Col(usize),
    Neg(Box<Bound>),
    Not(Box<Bound>),
    Bin(BinaryOp, Box<Bound>, Box<Bound>),
    Agg(AggFunc, Option<Box<Bound>>),
}

fn mismatch(msg: String) -> SqlError {
    SqlError::TypeMismatch(msg)
}

fn bind(e: &Expr, schema: &TableSchema) -> Result<(Bound, Ty), SqlError> {
    Ok(match e {
        Expr::Literal(v) => {
            let ty = match v {
                Value::Null => Ty::Null,
                Value::Int(_) => Ty::Int,
                Value::Double(_) => Ty::Double,
                Value::Text(_) => Ty::Text,
            };
            (Bound::Lit(v.clone()), ty)
        }
        Expr::Column(c) => {
            let i = schema
                .column_index(c)
                .ok_or_else(|| SqlError::UnknownColumn(c.clone()))?;
            let ty = match schema.columns[i].ty {
                ColumnType::Integer => Ty::Int,
                ColumnType::Double => Ty::Double,
                ColumnType::Varchar(_) => Ty::Text,
            };
            (Bound::Col(i), ty)
        }
        Expr::Neg(inner) => {
            let (b, ty) = bind(inner, schema)?;
            if !ty.numeric() {
                return Err(mismatch(format!("cannot negate {ty:?}")));
            }
            (Bound::Neg(Box::new(b)), if ty == Ty::Double { Ty::Double } else { Ty::Int })
        }
        Expr::Not(inner) => {
            let (b, ty) = bind(inner, schema)?;
            if ty != Ty::Bool {
                return Err(mismatch(format!("NOT needs a condition, found {ty:?}")));
            }
            (Bound::Not(Box::new(b)), Ty::Bool)
        }
        Expr::Binary { op, lhs, rhs } => {
            let (lb, lt) = bind(lhs, schema)?;
            let (rb, rt) = bind(rhs, schema)?;
            let ty = if op.is_arithmetic() {
                if !(lt.numeric() && rt.numeric()) {
                    return Err(mismatch(format!("{lt:?} {} {rt:?}", op.symbol())));
                }
                if lt == Ty::Double || rt == Ty::Double {
                    Ty::Double
                } else {
                    Ty::Int
                }
            } else if op.is_comparison() {
                let ok = (lt.numeric() && rt.numeric())
                    || (matches!(lt, Ty::Text | Ty::Null) && matches!(rt, Ty::Text | Ty::Null));
                if !ok {
                    return Err(mismatch(format!("cannot compare {lt:?} with {rt:?}")));
                }
                Ty::Bool
            } else {
                if lt != Ty::Bool || rt != Ty::Bool {
                    return Err(mismatch(format!("{} needs conditions", op.symbol())));
                }
                Ty::Bool
            };
            (Bound::Bin(*op, Box::new(lb), Box::new(rb)), ty)
        }
        Expr::Aggregate { func, arg } => {
            let Some(arg) = arg else {
                return Ok((Bound::Agg(*func, None), Ty::Int));
            };
            let (b, ty) = bind(arg, schema)?;
            let out = match func {
                AggFunc::Count if ty != Ty::Bool => Ty::Int,
                AggFunc::Sum if ty.numeric() => {
                    if ty == Ty::Double {
                        Ty::Double
                    } else {
                        Ty::Int
                    }
                }
                AggFunc::Avg if ty.numeric() => Ty::Double,
                AggFunc::Min | AggFunc::Max if ty != Ty::Bool => ty,
                _ => return Err(mismatch(format!("{} over {ty:?}", func.name()))),
            };
            (Bound::Agg(*func, Some(Box::new(b))), out)
        }
    })
}

/// Binds a condition (WHERE clause) against a schema.
pub struct Predicate(Bound);

impl Predicate {
    pub fn bind(e: &Expr, schema: &TableSchema) -> Result<Self, SqlError> {
        let (b, ty) = bind(e, schema)?;
        if ty != Ty::Bool {
            return Err(mismatch(format!("WHERE needs a condition, found {ty:?}")));
        }
        Ok(Predicate(b))
    }

    pub fn matches(&self, row: &Row) -> Result<bool, SqlError> {
        eval_bool(&self.0, &RowCtx::Row(row))
    }
}

/// Where column references read from: one row, or the first row of a
/// group whose aggregates range over all its rows.
enum RowCtx<'a> {
    Row(&'a Row),
    Group(&'a [&'a Row]),
}

impl RowCtx<'_> {
    fn column(&self, i: usize) -> Value {
        match self {
            RowCtx::Row(r) => r[i].clone(),
            RowCtx::Group(g) => g.first().map(|r| r[i].clone()).unwrap_or(Value::Null),
        }
    }
}

fn eval_bool(b: &Bound, ctx: &RowCtx<'_>) -> Result<bool, SqlError> {
    match b {
        Bound::Not(inner) => Ok(!eval_bool(inner, ctx)?),
        Bound::Bin(BinaryOp::And, l, r) => Ok(eval_bool(l, ctx)? && eval_bool(r, ctx)?),
        Bound::Bin(BinaryOp::Or, l, r) => Ok(eval_bool(l, ctx)? || eval_bool(r, ctx)?),
        Bound::Bin(op, l, r) => {
            let (a, b) = (eval_value(l, ctx)?, eval_value(r, ctx)?);
            let Some(ord) = a.sql_cmp(&b) else {
                return Ok(false);
            };
            Ok(match op {
                BinaryOp::Eq => ord == Ordering::Equal,
                BinaryOp::Ne => ord != Ordering::Equal,
                BinaryOp::Lt => ord == Ordering::Less,
                BinaryOp::Le => ord != Ordering::Greater,
                BinaryOp::Gt => ord == Ordering::Greater,
                BinaryOp::Ge => ord != Ordering::Less,
                _ => unreachable!("arithmetic bound as condition"),
            })
        }
        _ => unreachable!("value bound as condition"),
    }
}

fn eval_value(b: &Bound, ctx: &RowCtx<'_>) -> Result<Value, SqlError> {
    match b {
        Bound::Lit(v) => Ok(v.clone()),
        Bound::Col(i) => Ok(ctx.column(*i)),
        Bound::Neg(inner) => match eval_value(inner, ctx)? {
            Value::Int(i) => i.checked_neg().map(Value::Int).ok_or(SqlError::NumericOverflow),
            Value::Double(d) => Ok(Value::Double(-d)),
            _ => Ok(Value::Null),
        },
        Bound::Bin(op, l, r) => arith(*op, eval_value(l, ctx)?, eval_value(r, ctx)?),
        Bound::Agg(func, arg) => {
            let RowCtx::Group(rows) = ctx else {
                unreachable!("aggregate outside grouped evaluation")
            };
            aggregate(*func, arg.as_deref(), rows)
        }
        Bound::Not(_) => unreachable!("condition bound as value"),
    }
}

fn arith(op: BinaryOp, a: Value, b: Value) -> Result<Value, SqlError> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => {
            let r = match op {
                BinaryOp::Add => x.checked_add(y),
                BinaryOp::Sub => x.checked_sub(y),
                BinaryOp::Mul => x.checked_mul(y),
                BinaryOp::Div if y == 0 => return Ok(Value::Null),
                BinaryOp::Div => x.checked_div(y),
                _ => unreachable!(),
            };
            r.map(Value::Int).ok_or(SqlError::NumericOverflow)
        }
        (a, b) => {
            let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) else {
                return Ok(Value::Null);
            };
            Ok(match op {
                BinaryOp::Add => Value::Double(x + y),
                BinaryOp::Sub => Value::Double(x - y),
                BinaryOp::Mul => Value::Double(x * y),
                BinaryOp::Div if y == 0.0 => Value::Null,
                BinaryOp::Div => Value::Double(x / y),
                _ => unreachable!(),
            })
        }
    }
}

fn aggregate(func: AggFunc, arg: Option<&Bound>, rows: &[&Row]) -> Result<Value, SqlError> {
    let Some(arg) = arg else {
        return Ok(Value::Int(rows.len() as i64));
    };
    let mut values = Vec::with_capacity(rows.len());
    for r in rows {
        let v = eval_value(arg, &RowCtx::Row(r))?;
        if !v.is_null() {
            values.push(v);
        }
    }
    if func == AggFunc::Count {
        return Ok(Value::Int(values.len() as i64));
    }
    if values.is_empty() {
        return Ok(Value::Null);
    }
    Ok(match func {
        AggFunc::Sum => {
            if values.iter().all(|v| matches!(v, Value::Int(_))) {
                let mut acc: i64 = 0;
                for v in &values {
                    if let Value::Int(i) = v {
                        acc = acc.checked_add(*i).ok_or(SqlError::NumericOverflow)?;
                    }
                }
                Value::Int(acc)
            } else {
                Value::Double(values.iter().filter_map(Value::as_f64).fold(0.0, |a, x| a + x))
            }
        }
        AggFunc::Avg => {
            let sum = values.iter().filter_map(Value::as_f64).fold(0.0, |a, x| a + x);
            Value::Double(sum / values.len() as f64)
        }
        AggFunc::Min => values.into_iter().reduce(|a, b| if b < a { b } else { a }).unwrap_or(Value::Null),
        AggFunc::Max => values.into_iter().reduce(|a, b| if b > a { b } else { a }).unwrap_or(Value::Null),
        AggFunc::Count => unreachable!(),
    })
}

enum SortSource {
    Output(usize),
    Source(usize),
}

/// Runs a SELECT against `table`, which must be the table it names.
pub fn evaluate_select(stmt: &SelectStmt, table: &Table, statement: &str) -> Result<DataSet, SqlError> {
    let schema = &table.schema;
    let (items, columns): (Vec<Bound>, Vec<String>) = match &stmt.items {
        SelectItems::Star => (0..schema.columns.len())
            .map(|i| (Bound::Col(i), schema.columns[i].name.clone()))
            .unzip(),
        SelectItems::List(list) => {
            let mut bound = Vec::with_capacity(list.len());
            let mut names = Vec::with_capacity(list.len());
            for item in list {
                let (b, ty) = bind(&item.expr, schema)?;
                if ty == Ty::Bool {
                    return Err(mismatch(format!("cannot select condition {}", output_name(item))));
                }
                bound.push(b);
                names.push(output_name(item));
            }
            (bound, names)
        }
    };
    let predicate = stmt
        .where_clause
        .as_ref()
        .map(|w| Predicate::bind(w, schema))
        .transpose()?;
    let group_cols = stmt
        .group_by
        .iter()
        .map(|g| schema.column_index(g).ok_or_else(|| SqlError::UnknownColumn(g.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sort = Vec::with_capacity(stmt.order_by.len());
    for o in &stmt.order_by {
        let src = match &o.key {
            OrderKey::Ordinal(n) if *n <= columns.len() => SortSource::Output(n - 1),
            OrderKey::Ordinal(n) => return Err(SqlError::UnknownColumn(format!("position {n}"))),
            OrderKey::Column(c) => match columns.iter().position(|n| n == c) {
                Some(i) => SortSource::Output(i),
                None => SortSource::Source(
                    schema.column_index(c).ok_or_else(|| SqlError::UnknownColumn(c.clone()))?,
                ),
            },
        };
        sort.push((src, o.descending));
    }

    let mut kept: Vec<&Row> = Vec::new();
    for row in &table.rows {
        if match &predicate {
            Some(p) => p.matches(row)?,
            None => true,
        } {
            kept.push(row);
        }
    }

    let key_of = |out: &Row, first: Option<&Row>| -> Row {
        sort.iter()
            .map(|(src, _)| match src {
                SortSource::Output(i) => out[*i].clone(),
                SortSource::Source(j) => first.map(|r| r[*j].clone()).unwrap_or(Value::Null),
            })
            .collect()
    };

    let mut produced: Vec<(Row, Row)> = Vec::new();
    if stmt.is_grouped() {
        let mut groups: Vec<Vec<&Row>> = Vec::new();
        if group_cols.is_empty() {
            groups.push(kept);
        } else {
            let mut index: BTreeMap<Row, usize> = BTreeMap::new();
            for row in kept {
                let key: Row = group_cols.iter().map(|&c| row[c].clone()).collect();
                let slot = *index.entry(key).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[slot].push(row);
            }
        }
        for g in &groups {
            let ctx = RowCtx::Group(g);
            let out = items.iter().map(|b| eval_value(b, &ctx)).collect::<Result<Row, _>>()?;
            let key = key_of(&out, g.first().copied());
            produced.push((out, key));
        }
    } else {
        for row in kept {
            let ctx = RowCtx::Row(row);
            let out = items.iter().map(|b| eval_value(b, &ctx)).collect::<Result<Row, _>>()?;
            let key = key_of(&out, Some(row));
            produced.push((out, key));
        }
    }

    if stmt.distinct {
        let mut seen = BTreeSet::new();
        produced.retain(|(out, _)| seen.insert(out.clone()));
    }
    if !sort.is_empty() {
        produced.sort_by(|(_, a), (_, b)| {
            for (i, (_, desc)) in sort.iter().enumerate() {
                let ord = a[i].cmp(&b[i]);
                let ord = if *desc { ord.reverse() } else { ord };
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            Ordering::Equal
        });
    }
    Ok(DataSet {
        columns,
        rows: produced.into_iter().map(|(out, _)| out).collect(),
        statement: statement.into(),
    })
}
