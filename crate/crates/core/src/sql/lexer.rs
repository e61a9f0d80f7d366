use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Keyword or identifier, upper-cased.
    Word(String),
    /// Unsigned numeric literal text; `is_float` when it has a fraction or
    /// exponent.
    Number { text: String, is_float: bool },
    Str(String),
    Star,
    Comma,
    LParen,
    RParen,
    Semicolon,
    Plus,
    Minus,
    Slash,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Word(w) => f.write_str(w),
            TokenKind::Number { text, .. } => f.write_str(text),
            TokenKind::Str(s) => write!(f, "'{s}'"),
            TokenKind::Star => f.write_str("*"),
            TokenKind::Comma => f.write_str(","),
            TokenKind::LParen => f.write_str("("),
            TokenKind::RParen => f.write_str(")"),
            TokenKind::Semicolon => f.write_str(";"),
            TokenKind::Plus => f.write_str("+"),
            TokenKind::Minus => f.write_str("-"),
            TokenKind::Slash => f.write_str("/"),
            TokenKind::Eq => f.write_str("="),
            TokenKind::Ne => f.write_str("<>"),
            TokenKind::Lt => f.write_str("<"),
            TokenKind::Le => f.write_str("<="),
            TokenKind::Gt => f.write_str(">"),
            TokenKind::Ge => f.write_str(">="),
            TokenKind::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub col: usize,
}

/// Words that cannot be used as table, column or alias names.
pub const RESERVED: &[&str] = &[
    "AND", "AS", "ASC", "BY", "CREATE", "DELETE", "DESC", "DISTINCT", "DROP", "FROM", "GROUP",
    "INSERT", "INTO", "NOT", "NULL", "OR", "ORDER", "SELECT", "TABLE", "VALUES", "WHERE",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

struct Cursor<'a> {
    chars: core::iter::Peekable<core::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }
}

pub fn tokenize(input: &str) -> Result<Vec<Token>, SqlError> {
    let mut cur = Cursor {
        chars: input.chars().peekable(),
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        while matches!(cur.peek(), Some(c) if c.is_whitespace()) {
            cur.bump();
        }
        let (line, col) = (cur.line, cur.col);
        let Some(c) = cur.bump() else {
            out.push(Token {
                kind: TokenKind::Eof,
                line,
                col,
            });
            return Ok(out);
        };
        let kind = match c {
            '*' => TokenKind::Star,
            ',' => TokenKind::Comma,
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            ';' => TokenKind::Semicolon,
            '+' => TokenKind::Plus,
            '/' => TokenKind::Slash,
            '=' => TokenKind::Eq,
            '-' if cur.peek() == Some('-') => {
                while !matches!(cur.peek(), None | Some('\n')) {
                    cur.bump();
                }
                continue;
            }
            '-' => TokenKind::Minus,
            '<' => match cur.peek() {
                Some('=') => {
                    cur.bump();
                    TokenKind::Le
                }
                Some('>') => {
                    cur.bump();
                    TokenKind::Ne
                }
                _ => TokenKind::Lt,
            },
            '>' if cur.peek() == Some('=') => {
                cur.bump();
                TokenKind::Ge
            }
            '>' => TokenKind::Gt,
            '!' if cur.peek() == Some('=') => {
                cur.bump();
                TokenKind::Ne
            }
            '\'' => {
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        None => return Err(SqlError::parse(line, col, "unterminated string literal")),
                        Some('\'') if cur.peek() == Some('\'') => {
                            cur.bump();
                            s.push('\'');
                        }
                        Some('\'') => break,
                        Some(ch) => s.push(ch),
                    }
                }
                TokenKind::Str(s)
            }
            c if c.is_ascii_digit() || (c == '.' && matches!(cur.peek(), Some(d) if d.is_ascii_digit())) => {
                lex_number(c, &mut cur, line, col)?
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut w = String::new();
                w.push(c.to_ascii_uppercase());
                while let Some(n) = cur.peek() {
                    if n.is_ascii_alphanumeric() || n == '_' {
                        w.push(n.to_ascii_uppercase());
                        cur.bump();
                    } else {
                        break;
                    }
                }
                TokenKind::Word(w)
            }
            other => {
                return Err(SqlError::parse(
                    line,
                    col,
                    alloc::format!("unexpected character {other:?}"),
                ))
            }
        };
        out.push(Token { kind, line, col });
    }
}

fn lex_number(first: char, cur: &mut Cursor<'_>, line: usize, col: usize) -> Result<TokenKind, SqlError> {
    let mut text = String::new();
    text.push(first);
    let mut is_float = first == '.';
    let mut seen_dot = is_float;
    while let Some(c) = cur.peek() {
        if c.is_ascii_digit() {
            text.push(c);
            cur.bump();
        } else if c == '.' && !seen_dot {
            seen_dot = true;
            is_float = true;
            text.push(c);
            cur.bump();
        } else {
            break;
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        is_float = true;
        text.push('e');
        cur.bump();
        if let Some(sign @ ('+' | '-')) = cur.peek() {
            text.push(sign);
            cur.bump();
        }
        let mut digits = 0;
        while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
            text.push(d);
            cur.bump();
            digits += 1;
        }
        if digits == 0 {
            return Err(SqlError::parse(line, col, "malformed exponent in numeric literal"));
        }
    }
    if matches!(cur.peek(), Some(c) if c.is_ascii_alphabetic() || c == '_') {
        return Err(SqlError::parse(line, col, "malformed numeric literal"));
    }
    Ok(TokenKind::Number { text, is_float })
}
