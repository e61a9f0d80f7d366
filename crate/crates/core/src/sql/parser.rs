//! Recursive-descent parser for the statement language.
//!
//! ```text
//! statement := select | create | drop | insert | delete  [';']
//! select    := SELECT [DISTINCT] ('*' | item {',' item}) FROM name
//!              [WHERE expr] [GROUP BY name {',' name}]
//!              [ORDER BY (name | ordinal) [ASC|DESC] {',' ...}]
//! create    := CREATE TABLE name '(' coldef {',' coldef} [',' PRIMARY KEY '(' name ')'] ')'
//! coldef    := name (INTEGER | INT | DOUBLE [PRECISION] | VARCHAR '(' n ')') [NOT NULL]
//! drop      := DROP TABLE name
//! insert    := INSERT INTO name ['(' name {',' name} ')'] VALUES '(' literal {',' literal} ')'
//! delete    := DELETE FROM name [WHERE expr]
//! ```
//!
//! Besides the grammar, a SELECT must be well-formed as a grouped query:
//! aggregates never nest and never appear in WHERE, and once a query is
//! grouped every column outside an aggregate is a GROUP BY column.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use super::lexer::{is_reserved, tokenize, Token, TokenKind};
use super::print::expr_to_string;
use crate::error::SqlError;
use crate::schema::ColumnDef;
use crate::value::{ColumnType, Value};

pub fn parse_statement(text: &str) -> Result<Statement, SqlError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let stmt = p.statement()?;
    p.eat(&TokenKind::Semicolon);
    if p.peek() != &TokenKind::Eof {
        return Err(p.unexpected("end of statement"));
    }
    Ok(stmt)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn tok(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek(&self) -> &TokenKind {
        &self.tok().kind
    }

    fn peek_at(&self, ahead: usize) -> &TokenKind {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, tok: &Token, message: impl Into<String>) -> SqlError {
        SqlError::parse(tok.line, tok.col, message)
    }

    fn unexpected(&self, expected: &str) -> SqlError {
        let t = self.tok();
        self.error_at(t, format!("expected {expected}, found {}", t.kind))
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), TokenKind::Word(x) if x == w)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == kind {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), SqlError> {
        if self.eat(&kind) {
            Ok(())
        } else {
            Err(self.unexpected(&kind.to_string()))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), SqlError> {
        if self.eat_word(w) {
            Ok(())
        } else {
            Err(self.unexpected(w))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, SqlError> {
        match self.peek() {
            TokenKind::Word(w) if !is_reserved(w) => {
                let w = w.clone();
                self.advance();
                Ok(w)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn statement(&mut self) -> Result<Statement, SqlError> {
        match self.peek() {
            TokenKind::Word(w) => match w.as_str() {
                "SELECT" => self.select().map(Statement::Select),
                "CREATE" => self.create().map(Statement::CreateTable),
                "DROP" => {
                    self.advance();
                    self.expect_word("TABLE")?;
                    self.ident("table name").map(Statement::DropTable)
                }
                "INSERT" => self.insert().map(Statement::Insert),
                "DELETE" => {
                    self.advance();
                    self.expect_word("FROM")?;
                    let table = self.ident("table name")?;
                    let where_clause = if self.eat_word("WHERE") {
                        Some(self.expr(false)?)
                    } else {
                        None
                    };
                    Ok(Statement::Delete(DeleteStmt {
                        table,
                        where_clause,
                    }))
                }
                _ => Err(self.unexpected("SELECT, CREATE, DROP, INSERT or DELETE")),
            },
            _ => Err(self.unexpected("SELECT, CREATE, DROP, INSERT or DELETE")),
        }
    }

    fn select(&mut self) -> Result<SelectStmt, SqlError> {
        self.expect_word("SELECT")?;
        let distinct = self.eat_word("DISTINCT");
        let mut starts = Vec::new();
        let items = if self.eat(&TokenKind::Star) {
            SelectItems::Star
        } else {
            let mut items = Vec::new();
            loop {
                starts.push(self.tok().clone());
                let expr = self.expr(true)?;
                let alias = if self.eat_word("AS") || matches!(self.peek(), TokenKind::Word(w) if !is_reserved(w)) {
                    Some(self.ident("alias")?)
                } else {
                    None
                };
                items.push(SelectItem { expr, alias });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            SelectItems::List(items)
        };
        self.expect_word("FROM")?;
        let table = self.ident("table name")?;
        let where_clause = if self.eat_word("WHERE") {
            Some(self.expr(false)?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        let group_tok = self.tok().clone();
        if self.eat_word("GROUP") {
            self.expect_word("BY")?;
            loop {
                group_by.push(self.ident("column name")?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let mut order_by = Vec::new();
        let mut order_toks = Vec::new();
        if self.eat_word("ORDER") {
            self.expect_word("BY")?;
            loop {
                order_toks.push(self.tok().clone());
                let key = match self.peek().clone() {
                    TokenKind::Number { text, is_float: false } => {
                        let t = self.advance();
                        match text.parse::<usize>() {
                            Ok(n) if n >= 1 => OrderKey::Ordinal(n),
                            _ => return Err(self.error_at(&t, "ORDER BY position must be 1 or more")),
                        }
                    }
                    _ => OrderKey::Column(self.ident("column name or position")?),
                };
                let descending = if self.eat_word("DESC") {
                    true
                } else {
                    self.eat_word("ASC");
                    false
                };
                order_by.push(OrderItem { key, descending });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let stmt = SelectStmt {
            distinct,
            items,
            table,
            where_clause,
            group_by,
            order_by,
        };
        self.check_select(&stmt, &starts, &group_tok, &order_toks)?;
        Ok(stmt)
    }

    fn check_select(
        &self,
        stmt: &SelectStmt,
        item_starts: &[Token],
        group_tok: &Token,
        order_toks: &[Token],
    ) -> Result<(), SqlError> {
        let grouped = stmt.is_grouped();
        let items = match &stmt.items {
            SelectItems::Star if grouped => {
                return Err(self.error_at(group_tok, "SELECT * cannot be grouped"));
            }
            SelectItems::Star => return Ok(()),
            SelectItems::List(items) => items,
        };
        if grouped {
            for (item, tok) in items.iter().zip(item_starts) {
                let mut cols = Vec::new();
                item.expr.bare_columns(&mut cols);
                if let Some(c) = cols.iter().find(|c| !stmt.group_by.iter().any(|g| g == *c)) {
                    return Err(self.error_at(tok, format!("column {c} must appear in GROUP BY or inside an aggregate")));
                }
            }
        }
        let names: Vec<String> = items.iter().map(output_name).collect();
        for (o, tok) in stmt.order_by.iter().zip(order_toks) {
            match &o.key {
                OrderKey::Ordinal(n) if *n > items.len() => {
                    return Err(self.error_at(tok, format!("ORDER BY position {n} is out of range")));
                }
                OrderKey::Column(c) if !names.iter().any(|n| n == c) => {
                    if grouped && !stmt.group_by.iter().any(|g| g == c) {
                        return Err(self.error_at(tok, format!("ORDER BY column {c} must be an output or GROUP BY column")));
                    }
                    if stmt.distinct {
                        return Err(self.error_at(tok, format!("ORDER BY column {c} must be an output column with DISTINCT")));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn create(&mut self) -> Result<CreateTableStmt, SqlError> {
        self.expect_word("CREATE")?;
        self.expect_word("TABLE")?;
        let name = self.ident("table name")?;
        self.expect(TokenKind::LParen)?;
        let mut columns = Vec::new();
        let mut primary_key = None;
        loop {
            if self.is_word("PRIMARY") && matches!(self.peek_at(1), TokenKind::Word(w) if w == "KEY") {
                self.advance();
                self.advance();
                self.expect(TokenKind::LParen)?;
                primary_key = Some(self.ident("column name")?);
                self.expect(TokenKind::RParen)?;
                break;
            }
            let col = self.ident("column name")?;
            let ty = self.column_type()?;
            let nullable = if self.eat_word("NOT") {
                self.expect_word("NULL")?;
                false
            } else {
                true
            };
            columns.push(ColumnDef { name: col, ty, nullable });
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(CreateTableStmt {
            name,
            columns,
            primary_key,
        })
    }

    fn column_type(&mut self) -> Result<ColumnType, SqlError> {
        let tok = self.tok().clone();
        let TokenKind::Word(w) = &tok.kind else {
            return Err(self.unexpected("column type"));
        };
        match w.as_str() {
            "INTEGER" | "INT" => {
                self.advance();
                Ok(ColumnType::Integer)
            }
            "DOUBLE" => {
                self.advance();
                self.eat_word("PRECISION");
                Ok(ColumnType::Double)
            }
            "VARCHAR" => {
                self.advance();
                self.expect(TokenKind::LParen)?;
                let n = match self.peek().clone() {
                    TokenKind::Number { text, is_float: false } => {
                        let t = self.advance();
                        text.parse::<u32>()
                            .map_err(|_| self.error_at(&t, "VARCHAR length out of range"))?
                    }
                    _ => return Err(self.unexpected("VARCHAR length")),
                };
                self.expect(TokenKind::RParen)?;
                Ok(ColumnType::Varchar(n))
            }
            _ => Err(self.unexpected("INTEGER, DOUBLE or VARCHAR(n)")),
        }
    }

    fn insert(&mut self) -> Result<InsertStmt, SqlError> {
        self.expect_word("INSERT")?;
        self.expect_word("INTO")?;
        let table = self.ident("table name")?;
        let columns = if self.eat(&TokenKind::LParen) {
            let mut cols = Vec::new();
            loop {
                cols.push(self.ident("column name")?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            self.expect(TokenKind::RParen)?;
            Some(cols)
        } else {
            None
        };
        self.expect_word("VALUES")?;
        self.expect(TokenKind::LParen)?;
        let mut values = Vec::new();
        loop {
            values.push(self.literal()?);
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(InsertStmt {
            table,
            columns,
            values,
        })
    }

    fn literal(&mut self) -> Result<Value, SqlError> {
        let negative = if self.eat(&TokenKind::Minus) {
            true
        } else {
            self.eat(&TokenKind::Plus);
            false
        };
        match self.peek().clone() {
            TokenKind::Number { text, is_float } => {
                let t = self.advance();
                self.number(&t, &text, is_float, negative)
            }
            TokenKind::Str(s) if !negative => {
                self.advance();
                Ok(Value::Text(s))
            }
            TokenKind::Word(w) if w == "NULL" && !negative => {
                self.advance();
                Ok(Value::Null)
            }
            _ => Err(self.unexpected("literal")),
        }
    }

    fn number(&self, tok: &Token, text: &str, is_float: bool, negative: bool) -> Result<Value, SqlError> {
        if is_float {
            let d: f64 = text
                .parse()
                .map_err(|_| self.error_at(tok, "malformed numeric literal"))?;
            Ok(Value::Double(if negative { -d } else { d }))
        } else {
            let signed = if negative { format!("-{text}") } else { text.to_string() };
            signed
                .parse::<i64>()
                .map(Value::Int)
                .map_err(|_| self.error_at(tok, "integer literal out of range"))
        }
    }

    fn expr(&mut self, allow_agg: bool) -> Result<Expr, SqlError> {
        self.or_expr(allow_agg)
    }

    fn or_expr(&mut self, agg: bool) -> Result<Expr, SqlError> {
        let mut lhs = self.and_expr(agg)?;
        while self.eat_word("OR") {
            let rhs = self.and_expr(agg)?;
            lhs = Expr::binary(BinaryOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self, agg: bool) -> Result<Expr, SqlError> {
        let mut lhs = self.not_expr(agg)?;
        while self.eat_word("AND") {
            let rhs = self.not_expr(agg)?;
            lhs = Expr::binary(BinaryOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self, agg: bool) -> Result<Expr, SqlError> {
        if self.eat_word("NOT") {
            Ok(Expr::Not(Box::new(self.not_expr(agg)?)))
        } else {
            self.cmp_expr(agg)
        }
    }

    fn cmp_expr(&mut self, agg: bool) -> Result<Expr, SqlError> {
        let lhs = self.add_expr(agg)?;
        let op = match self.peek() {
            TokenKind::Eq => BinaryOp::Eq,
            TokenKind::Ne => BinaryOp::Ne,
            TokenKind::Lt => BinaryOp::Lt,
            TokenKind::Le => BinaryOp::Le,
            TokenKind::Gt => BinaryOp::Gt,
            TokenKind::Ge => BinaryOp::Ge,
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.add_expr(agg)?;
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn add_expr(&mut self, agg: bool) -> Result<Expr, SqlError> {
        let mut lhs = self.mul_expr(agg)?;
        loop {
            let op = match self.peek() {
                TokenKind::Plus => BinaryOp::Add,
                TokenKind::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.mul_expr(agg)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn mul_expr(&mut self, agg: bool) -> Result<Expr, SqlError> {
        let mut lhs = self.unary(agg)?;
        loop {
            let op = match self.peek() {
                TokenKind::Star => BinaryOp::Mul,
                TokenKind::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary(agg)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self, agg: bool) -> Result<Expr, SqlError> {
        if self.eat(&TokenKind::Minus) {
            // A sign directly before a numeric literal folds into it.
            if let TokenKind::Number { text, is_float } = self.peek().clone() {
                let t = self.advance();
                return self.number(&t, &text, is_float, true).map(Expr::Literal);
            }
            return Ok(Expr::Neg(Box::new(self.unary(agg)?)));
        }
        self.primary(agg)
    }

    fn primary(&mut self, agg: bool) -> Result<Expr, SqlError> {
        let tok = self.tok().clone();
        match &tok.kind {
            TokenKind::Number { text, is_float } => {
                self.advance();
                self.number(&tok, text, *is_float, false).map(Expr::Literal)
            }
            TokenKind::Str(s) => {
                self.advance();
                Ok(Expr::Literal(Value::Text(s.clone())))
            }
            TokenKind::LParen => {
                self.advance();
                let e = self.expr(agg)?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Word(w) if w == "NULL" => {
                self.advance();
                Ok(Expr::Literal(Value::Null))
            }
            TokenKind::Word(w) if self.peek_at(1) == &TokenKind::LParen => {
                let func = match w.as_str() {
                    "COUNT" => AggFunc::Count,
                    "SUM" => AggFunc::Sum,
                    "AVG" => AggFunc::Avg,
                    "MIN" => AggFunc::Min,
                    "MAX" => AggFunc::Max,
                    _ => return Err(self.error_at(&tok, format!("unknown function {w}"))),
                };
                if !agg {
                    return Err(self.error_at(&tok, format!("aggregate {w} not allowed here")));
                }
                self.advance();
                self.advance();
                let arg = if func == AggFunc::Count && self.eat(&TokenKind::Star) {
                    None
                } else {
                    Some(Box::new(self.expr(false)?))
                };
                self.expect(TokenKind::RParen)?;
                Ok(Expr::Aggregate { func, arg })
            }
            TokenKind::Word(w) if !is_reserved(w) => {
                self.advance();
                Ok(Expr::Column(w.clone()))
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

/// Output column name of a select item: its alias, else the canonical
/// text of its expression.
pub fn output_name(item: &SelectItem) -> String {
    match &item.alias {
        Some(a) => a.clone(),
        None => expr_to_string(&item.expr),
    }
}
