//! Seeded random tables and well-formed SELECT statements over them.

use ibdwb_core::sql::print::literal_to_string;
use ibdwb_core::sql::{AggFunc, BinaryOp, Expr, OrderItem, OrderKey, SelectItem, SelectItems, SelectStmt};
use ibdwb_core::{ColumnType, Value};
use rand::seq::IndexedRandom;
use rand::Rng;

pub type Row = Vec<Value>;

#[derive(Debug, Clone)]
pub struct GenTable {
    pub name: String,
    /// (name, type, nullable)
    pub columns: Vec<(String, ColumnType, bool)>,
    pub rows: Vec<Row>,
}

const TEXTS: &[&str] = &["a", "b", "ab", "B", "", "z'q", "é"];

fn random_value(rng: &mut impl Rng, ty: ColumnType, nullable: bool) -> Value {
    if nullable && rng.random_bool(0.15) {
        return Value::Null;
    }
    match ty {
        ColumnType::Integer => Value::Int(rng.random_range(-4..=4)),
        ColumnType::Double => Value::Double(rng.random_range(-5..=5) as f64 / 2.0),
        ColumnType::Varchar(_) => Value::Text(TEXTS.choose(rng).unwrap().to_string()),
    }
}

pub fn random_table(rng: &mut impl Rng, name: &str, max_cols: usize, max_rows: usize) -> GenTable {
    let ncols = rng.random_range(1..=max_cols);
    let columns: Vec<(String, ColumnType, bool)> = (0..ncols)
        .map(|i| {
            let ty = match rng.random_range(0..3) {
                0 => ColumnType::Integer,
                1 => ColumnType::Double,
                _ => ColumnType::Varchar(8),
            };
            (format!("C{i}"), ty, rng.random_bool(0.8))
        })
        .collect();
    let nrows = rng.random_range(0..=max_rows);
    let rows = (0..nrows)
        .map(|_| columns.iter().map(|(_, ty, n)| random_value(rng, *ty, *n)).collect())
        .collect();
    GenTable {
        name: name.to_string(),
        columns,
        rows,
    }
}

impl GenTable {
    pub fn create_sql(&self) -> String {
        let cols: Vec<String> = self
            .columns
            .iter()
            .map(|(n, ty, nullable)| format!("{n} {ty}{}", if *nullable { "" } else { " NOT NULL" }))
            .collect();
        format!("CREATE TABLE {} ({})", self.name, cols.join(", "))
    }

    pub fn insert_sqls(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                let vals: Vec<String> = r.iter().map(literal_to_string).collect();
                format!("INSERT INTO {} VALUES ({})", self.name, vals.join(", "))
            })
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Kind {
    Num,
    Text,
}

fn kind(ty: ColumnType) -> Kind {
    if ty.is_numeric() {
        Kind::Num
    } else {
        Kind::Text
    }
}

struct Gen<'a, R: Rng> {
    rng: &'a mut R,
    /// Columns visible to bare references.
    cols: Vec<(String, Kind)>,
}

impl<R: Rng> Gen<'_, R> {
    fn literal(&mut self, k: Kind) -> Expr {
        if self.rng.random_bool(0.08) {
            return Expr::Literal(Value::Null);
        }
        Expr::Literal(match k {
            Kind::Num if self.rng.random_bool(0.5) => Value::Int(self.rng.random_range(-3..=3)),
            Kind::Num => Value::Double(self.rng.random_range(-6..=6) as f64 / 4.0),
            Kind::Text => Value::Text(TEXTS.choose(self.rng).unwrap().to_string()),
        })
    }

    fn column(&mut self, k: Kind) -> Option<Expr> {
        let matching: Vec<&String> = self.cols.iter().filter(|(_, ck)| *ck == k).map(|(n, _)| n).collect();
        matching.choose(self.rng).map(|n| Expr::Column((*n).clone()))
    }

    fn leaf(&mut self, k: Kind) -> Expr {
        if self.rng.random_bool(0.7) {
            if let Some(c) = self.column(k) {
                return c;
            }
        }
        self.literal(k)
    }

    fn value(&mut self, k: Kind, depth: u32) -> Expr {
        if k == Kind::Text || depth == 0 || self.rng.random_bool(0.45) {
            return self.leaf(k);
        }
        if self.rng.random_bool(0.15) {
            return Expr::Neg(Box::new(self.value(Kind::Num, depth - 1)));
        }
        let op = *[BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div].choose(self.rng).unwrap();
        Expr::binary(op, self.value(Kind::Num, depth - 1), self.value(Kind::Num, depth - 1))
    }

    fn any_kind(&mut self) -> Kind {
        let have_text = self.cols.iter().any(|(_, k)| *k == Kind::Text);
        if have_text && self.rng.random_bool(0.35) {
            Kind::Text
        } else {
            Kind::Num
        }
    }

    fn condition(&mut self, depth: u32) -> Expr {
        if depth > 0 && self.rng.random_bool(0.35) {
            if self.rng.random_bool(0.25) {
                return Expr::Not(Box::new(self.condition(depth - 1)));
            }
            let op = if self.rng.random_bool(0.5) { BinaryOp::And } else { BinaryOp::Or };
            return Expr::binary(op, self.condition(depth - 1), self.condition(depth - 1));
        }
        let op = *[BinaryOp::Eq, BinaryOp::Ne, BinaryOp::Lt, BinaryOp::Le, BinaryOp::Gt, BinaryOp::Ge]
            .choose(self.rng)
            .unwrap();
        let k = self.any_kind();
        Expr::binary(op, self.value(k, 1), self.value(k, 1))
    }

    fn aggregate(&mut self, all: &[(String, Kind)]) -> Expr {
        let saved = std::mem::replace(&mut self.cols, all.to_vec());
        let func = *[AggFunc::Count, AggFunc::Sum, AggFunc::Avg, AggFunc::Min, AggFunc::Max]
            .choose(self.rng)
            .unwrap();
        let arg = match func {
            AggFunc::Count if self.rng.random_bool(0.4) => None,
            AggFunc::Count | AggFunc::Min | AggFunc::Max => {
                let k = self.any_kind();
                Some(Box::new(self.value(k, 1)))
            }
            AggFunc::Sum | AggFunc::Avg => Some(Box::new(self.value(Kind::Num, 1))),
        };
        self.cols = saved;
        Expr::Aggregate { func, arg }
    }
}

fn alias_or_none(rng: &mut impl Rng, i: usize) -> Option<String> {
    rng.random_bool(0.3).then(|| format!("A{i}"))
}

/// A SELECT over `table` that parses and type-checks. Values stay small
/// enough that no arithmetic overflows.
pub fn random_select(rng: &mut impl Rng, table: &GenTable) -> SelectStmt {
    let all: Vec<(String, Kind)> = table.columns.iter().map(|(n, ty, _)| (n.clone(), kind(*ty))).collect();
    let grouped = rng.random_bool(0.4);
    let distinct = rng.random_bool(if grouped { 0.15 } else { 0.3 });
    let mut g = Gen {
        rng,
        cols: all.clone(),
    };
    let where_clause = g.rng.random_bool(0.6).then(|| g.condition(2));

    let (items, group_by) = if grouped {
        let mut group_by: Vec<String> = Vec::new();
        for _ in 0..g.rng.random_range(0..=2) {
            let (n, _) = all.choose(g.rng).unwrap();
            if !group_by.contains(n) {
                group_by.push(n.clone());
            }
        }
        g.cols = all.iter().filter(|(n, _)| group_by.contains(n)).cloned().collect();
        let mut items = Vec::new();
        for (i, gcol) in group_by.iter().enumerate() {
            if g.rng.random_bool(0.7) {
                items.push(SelectItem {
                    expr: Expr::Column(gcol.clone()),
                    alias: alias_or_none(g.rng, i),
                });
            }
        }
        let naggs = g.rng.random_range(if group_by.is_empty() { 1 } else { 0 }..=2);
        for _ in 0..naggs {
            let mut e = g.aggregate(&all);
            if g.rng.random_bool(0.2) && !aggregate_is_text(&e, &all) {
                let lit = g.literal(Kind::Num);
                e = Expr::binary(BinaryOp::Add, e, lit);
            }
            let i = items.len();
            items.push(SelectItem {
                expr: e,
                alias: alias_or_none(g.rng, i),
            });
        }
        if g.rng.random_bool(0.2) && g.cols.iter().any(|(_, k)| *k == Kind::Num) {
            let e = g.value(Kind::Num, 1);
            let i = items.len();
            items.push(SelectItem {
                expr: e,
                alias: alias_or_none(g.rng, i),
            });
        }
        if items.is_empty() {
            items.push(SelectItem {
                expr: Expr::Aggregate {
                    func: AggFunc::Count,
                    arg: None,
                },
                alias: None,
            });
        }
        (SelectItems::List(items), group_by)
    } else if g.rng.random_bool(0.2) {
        (SelectItems::Star, Vec::new())
    } else {
        let n = g.rng.random_range(1..=4);
        let items = (0..n)
            .map(|i| {
                let k = g.any_kind();
                let expr = g.value(k, 2);
                SelectItem {
                    expr,
                    alias: alias_or_none(g.rng, i),
                }
            })
            .collect();
        (SelectItems::List(items), Vec::new())
    };

    // Names usable as ORDER BY keys.
    let out_names: Vec<String> = match &items {
        SelectItems::Star => all.iter().map(|(n, _)| n.clone()).collect(),
        SelectItems::List(list) => list
            .iter()
            .filter_map(|it| match (&it.alias, &it.expr) {
                (Some(a), _) => Some(a.clone()),
                (None, Expr::Column(c)) => Some(c.clone()),
                _ => None,
            })
            .collect(),
    };
    let width = match &items {
        SelectItems::Star => all.len(),
        SelectItems::List(l) => l.len(),
    };
    let mut order_by = Vec::new();
    if g.rng.random_bool(0.6) {
        for _ in 0..g.rng.random_range(1..=3) {
            let key = match g.rng.random_range(0..3) {
                0 => OrderKey::Ordinal(g.rng.random_range(1..=width)),
                1 if !out_names.is_empty() => OrderKey::Column(out_names.choose(g.rng).unwrap().clone()),
                _ if !distinct && grouped && !group_by.is_empty() => {
                    OrderKey::Column(group_by.choose(g.rng).unwrap().clone())
                }
                _ if !distinct && !grouped => OrderKey::Column(all.choose(g.rng).unwrap().0.clone()),
                _ => OrderKey::Ordinal(g.rng.random_range(1..=width)),
            };
            order_by.push(OrderItem {
                key,
                descending: g.rng.random_bool(0.4),
            });
        }
    }

    SelectStmt {
        distinct,
        items,
        table: table.name.clone(),
        where_clause,
        group_by,
        order_by,
    }
}

fn aggregate_is_text(e: &Expr, all: &[(String, Kind)]) -> bool {
    fn text_expr(e: &Expr, all: &[(String, Kind)]) -> bool {
        match e {
            Expr::Literal(Value::Text(_)) => true,
            Expr::Column(c) => all.iter().any(|(n, k)| n == c && *k == Kind::Text),
            _ => false,
        }
    }
    match e {
        Expr::Aggregate {
            func: AggFunc::Min | AggFunc::Max,
            arg: Some(a),
        } => text_expr(a, all),
        _ => false,
    }
}
