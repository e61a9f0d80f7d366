//! A deliberately naive SELECT evaluator: linear scans, insertion sort,
//! no binding step. It shares only the AST and `Value` with the engine.

use std::cmp::Ordering;

use ibdwb_core::sql::{AggFunc, BinaryOp, Expr, OrderKey, SelectItems, SelectStmt};
use ibdwb_core::Value;

use super::gen::{GenTable, Row};

/// Result of the oracle: output names (None where the engine picks a
/// canonical text the oracle does not model) and rows.
#[derive(Debug)]
pub struct OracleResult {
    pub names: Vec<Option<String>>,
    pub rows: Vec<Row>,
}

fn rank(v: &Value) -> u8 {
    match v {
        Value::Null => 0,
        Value::Int(_) | Value::Double(_) => 1,
        Value::Text(_) => 2,
    }
}

/// Sorting order: NULL, then numbers by magnitude (INTEGER before an
/// equal DOUBLE), then text.
pub fn order(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Text(x), Value::Text(y)) => x.as_bytes().cmp(y.as_bytes()),
        (Value::Int(x), Value::Double(y)) => (*x as f64).partial_cmp(y).unwrap().then(Ordering::Less),
        (Value::Double(x), Value::Int(y)) => x.partial_cmp(&(*y as f64)).unwrap().then(Ordering::Greater),
        (Value::Double(x), Value::Double(y)) => x.partial_cmp(y).unwrap(),
        _ => rank(a).cmp(&rank(b)),
    }
}

pub fn same(a: &Value, b: &Value) -> bool {
    order(a, b) == Ordering::Equal
}

fn same_row(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| same(x, y))
}

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Double(d) => Some(*d),
        _ => None,
    }
}

fn compare(op: BinaryOp, a: &Value, b: &Value) -> bool {
    let ord = match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Text(x), Value::Text(y)) => Some(x.as_bytes().cmp(y.as_bytes())),
        _ => match (num(a), num(b)) {
            (Some(x), Some(y)) => x.partial_cmp(&y),
            _ => None,
        },
    };
    let Some(o) = ord else { return false };
    match op {
        BinaryOp::Eq => o.is_eq(),
        BinaryOp::Ne => o.is_ne(),
        BinaryOp::Lt => o.is_lt(),
        BinaryOp::Le => o.is_le(),
        BinaryOp::Gt => o.is_gt(),
        BinaryOp::Ge => o.is_ge(),
        _ => unreachable!(),
    }
}

fn arith(op: BinaryOp, a: Value, b: Value) -> Option<Value> {
    if let (Value::Int(x), Value::Int(y)) = (&a, &b) {
        let (x, y) = (*x, *y);
        return match op {
            BinaryOp::Div if y == 0 => Some(Value::Null),
            BinaryOp::Add => x.checked_add(y).map(Value::Int),
            BinaryOp::Sub => x.checked_sub(y).map(Value::Int),
            BinaryOp::Mul => x.checked_mul(y).map(Value::Int),
            BinaryOp::Div => x.checked_div(y).map(Value::Int),
            _ => unreachable!(),
        };
    }
    let (Some(x), Some(y)) = (num(&a), num(&b)) else {
        return Some(Value::Null);
    };
    Some(match op {
        BinaryOp::Add => Value::Double(x + y),
        BinaryOp::Sub => Value::Double(x - y),
        BinaryOp::Mul => Value::Double(x * y),
        BinaryOp::Div if y == 0.0 => Value::Null,
        BinaryOp::Div => Value::Double(x / y),
        _ => unreachable!(),
    })
}

struct Ctx<'a> {
    table: &'a GenTable,
    /// Rows of the current group; a plain row is a group of one.
    group: &'a [&'a Row],
}

impl Ctx<'_> {
    fn col(&self, name: &str) -> Value {
        let i = self.table.columns.iter().position(|(n, _, _)| n == name).expect("column");
        self.group.first().map(|r| r[i].clone()).unwrap_or(Value::Null)
    }

    fn truth(&self, e: &Expr) -> Option<bool> {
        Some(match e {
            Expr::Not(x) => !self.truth(x)?,
            Expr::Binary { op: BinaryOp::And, lhs, rhs } => self.truth(lhs)? && self.truth(rhs)?,
            Expr::Binary { op: BinaryOp::Or, lhs, rhs } => self.truth(lhs)? || self.truth(rhs)?,
            Expr::Binary { op, lhs, rhs } => compare(*op, &self.value(lhs)?, &self.value(rhs)?),
            _ => panic!("not a condition"),
        })
    }

    /// `None` means the engine is expected to report overflow.
    fn value(&self, e: &Expr) -> Option<Value> {
        match e {
            Expr::Literal(v) => Some(v.clone()),
            Expr::Column(c) => Some(self.col(c)),
            Expr::Neg(x) => match self.value(x)? {
                Value::Int(i) => i.checked_neg().map(Value::Int),
                Value::Double(d) => Some(Value::Double(-d)),
                _ => Some(Value::Null),
            },
            Expr::Binary { op, lhs, rhs } => arith(*op, self.value(lhs)?, self.value(rhs)?),
            Expr::Not(_) => panic!("condition used as value"),
            Expr::Aggregate { func, arg } => self.aggregate(*func, arg.as_deref()),
        }
    }

    fn aggregate(&self, func: AggFunc, arg: Option<&Expr>) -> Option<Value> {
        let Some(arg) = arg else {
            return Some(Value::Int(self.group.len() as i64));
        };
        let mut vals = Vec::new();
        for r in self.group {
            let one = [*r];
            let v = Ctx { table: self.table, group: &one }.value(arg)?;
            if !matches!(v, Value::Null) {
                vals.push(v);
            }
        }
        if func == AggFunc::Count {
            return Some(Value::Int(vals.len() as i64));
        }
        if vals.is_empty() {
            return Some(Value::Null);
        }
        Some(match func {
            AggFunc::Sum if vals.iter().all(|v| matches!(v, Value::Int(_))) => {
                let mut acc = 0i64;
                for v in &vals {
                    let Value::Int(i) = v else { unreachable!() };
                    acc = acc.checked_add(*i)?;
                }
                Value::Int(acc)
            }
            AggFunc::Sum => {
                let mut acc = 0.0;
                for v in &vals {
                    acc += num(v).unwrap();
                }
                Value::Double(acc)
            }
            AggFunc::Avg => {
                let mut acc = 0.0;
                for v in &vals {
                    acc += num(v).unwrap();
                }
                Value::Double(acc / vals.len() as f64)
            }
            AggFunc::Min | AggFunc::Max => {
                let mut best = vals[0].clone();
                for v in &vals[1..] {
                    let better = match func {
                        AggFunc::Min => order(v, &best).is_lt(),
                        _ => order(v, &best).is_gt(),
                    };
                    if better {
                        best = v.clone();
                    }
                }
                best
            }
            AggFunc::Count => unreachable!(),
        })
    }
}

fn has_aggregate(e: &Expr) -> bool {
    match e {
        Expr::Aggregate { .. } => true,
        Expr::Neg(x) | Expr::Not(x) => has_aggregate(x),
        Expr::Binary { lhs, rhs, .. } => has_aggregate(lhs) || has_aggregate(rhs),
        _ => false,
    }
}

/// Evaluates `stmt` over `table`. Returns `None` when some arithmetic
/// overflows, which the generator is meant to rule out.
pub fn run(stmt: &SelectStmt, table: &GenTable) -> Option<OracleResult> {
    // Output expressions and names.
    let (exprs, names): (Vec<Expr>, Vec<Option<String>>) = match &stmt.items {
        SelectItems::Star => table
            .columns
            .iter()
            .map(|(n, _, _)| (Expr::Column(n.clone()), Some(n.clone())))
            .unzip(),
        SelectItems::List(items) => items
            .iter()
            .map(|it| {
                let name = match (&it.alias, &it.expr) {
                    (Some(a), _) => Some(a.clone()),
                    (None, Expr::Column(c)) => Some(c.clone()),
                    _ => None,
                };
                (it.expr.clone(), name)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .unzip(),
    };
    let grouped = !stmt.group_by.is_empty() || exprs.iter().any(has_aggregate);

    let mut kept: Vec<&Row> = Vec::new();
    for r in &table.rows {
        let one = [r];
        let pass = match &stmt.where_clause {
            None => true,
            Some(w) => Ctx { table, group: &one }.truth(w)?,
        };
        if pass {
            kept.push(r);
        }
    }

    let groups: Vec<Vec<&Row>> = if !grouped {
        kept.iter().map(|r| vec![*r]).collect()
    } else if stmt.group_by.is_empty() {
        vec![kept]
    } else {
        let idx: Vec<usize> = stmt
            .group_by
            .iter()
            .map(|g| table.columns.iter().position(|(n, _, _)| n == g).unwrap())
            .collect();
        let mut keys: Vec<Row> = Vec::new();
        let mut groups: Vec<Vec<&Row>> = Vec::new();
        for r in kept {
            let key: Row = idx.iter().map(|&i| r[i].clone()).collect();
            match keys.iter().position(|k| same_row(k, &key)) {
                Some(p) => groups[p].push(r),
                None => {
                    keys.push(key);
                    groups.push(vec![r]);
                }
            }
        }
        groups
    };

    // (output row, sort key)
    let mut out: Vec<(Row, Row)> = Vec::new();
    for g in &groups {
        let ctx = Ctx { table, group: g };
        let mut row = Vec::new();
        for e in &exprs {
            row.push(ctx.value(e)?);
        }
        let mut key = Vec::new();
        for o in &stmt.order_by {
            key.push(match &o.key {
                OrderKey::Ordinal(n) => row[n - 1].clone(),
                OrderKey::Column(c) => match names.iter().position(|n| n.as_deref() == Some(c.as_str())) {
                    Some(i) => row[i].clone(),
                    None => ctx.col(c),
                },
            });
        }
        out.push((row, key));
    }

    if stmt.distinct {
        let mut uniq: Vec<(Row, Row)> = Vec::new();
        for item in out {
            if !uniq.iter().any(|(r, _)| same_row(r, &item.0)) {
                uniq.push(item);
            }
        }
        out = uniq;
    }

    // Stable insertion sort.
    let before = |a: &Row, b: &Row| -> bool {
        for (i, o) in stmt.order_by.iter().enumerate() {
            let mut c = order(&a[i], &b[i]);
            if o.descending {
                c = c.reverse();
            }
            if c != Ordering::Equal {
                return c == Ordering::Less;
            }
        }
        false
    };
    for i in 1..out.len() {
        let mut j = i;
        while j > 0 && before(&out[j].1, &out[j - 1].1) {
            out.swap(j, j - 1);
            j -= 1;
        }
    }

    Some(OracleResult {
        names,
        rows: out.into_iter().map(|(r, _)| r).collect(),
    })
}

/// True when `a` and `b` hold the same rows with the same multiplicities.
pub fn same_multiset(a: &[Row], b: &[Row]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    'outer: for r in a {
        for (i, s) in b.iter().enumerate() {
            if !used[i] && same_row(r, s) {
                used[i] = true;
                continue 'outer;
            }
        }
        return false;
    }
    true
}
