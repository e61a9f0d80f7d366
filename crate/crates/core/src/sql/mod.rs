//! The statement language: a single-table SELECT subset plus the DDL and
//! DML the rest of the system needs.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod print;

pub use ast::*;
pub use parser::{output_name, parse_statement};
pub use print::{expr_to_string, quote, statement_to_string};
