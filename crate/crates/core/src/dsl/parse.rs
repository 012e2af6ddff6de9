//! Expression parser.
//!
//! Grammar (lowest precedence first):
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | primary
//! primary := number | column | call | "(" expr ")"
//! call    := name "(" expr ("," arg)* ")"
//! ```
//!
//! Calls: `abs(x)`, `sign(x)`, `log(x)`, `diff(x)`, `czs(x)`, `crank(x)`,
//! `mean(x, w)`, `std(x, w)`, `sum(x, w)`, `min(x, w)`, `max(x, w)`,
//! `corr(x, y, w)`, `lag(x, k)`. Windows `w` and lags `k` must be integer
//! literals with `w >= 1` and `k >= 1`.

use std::fmt;

use thiserror::Error;

use crate::panel::Column;
use crate::scalar::Scalar;

use super::ast::{Expr, RollOp};

/// Parse failure with a byte position into the source string.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier {s:?}"),
            Tok::Num(s) => write!(f, "number {s:?}"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::Comma => f.write_str("','"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Star => f.write_str("'*'"),
            Tok::Slash => f.write_str("'/'"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            ',' => {
                toks.push((Tok::Comma, i));
                i += 1;
            }
            '+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                toks.push((Tok::Num(src[start..i].to_string()), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(src[start..i].to_string()), start));
            }
            other => {
                return Err(ParseError {
                    pos: i,
                    msg: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    toks.push((Tok::Eof, src.len()));
    Ok(toks)
}

struct Parser<'a, R> {
    toks: &'a [(Tok, usize)],
    at: usize,
    _marker: std::marker::PhantomData<R>,
}

impl<'a, R: Scalar> Parser<'a, R> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok) -> Result<(), ParseError> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(ParseError {
                pos: self.pos(),
                msg: format!("expected {want}, found {}", self.peek()),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr<R>, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr<R>, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr<R>, ParseError> {
        if matches!(self.peek(), Tok::Minus) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr<R>, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(raw) => raw.parse::<R>().map(Expr::Lit).map_err(|_| ParseError {
                pos,
                msg: format!("invalid number {raw:?}"),
            }),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if matches!(self.peek(), Tok::LParen) {
                    self.bump();
                    self.call(&name, pos)
                } else if let Some(col) = Column::from_name(&name) {
                    Ok(Expr::Col(col))
                } else {
                    Err(ParseError {
                        pos,
                        msg: format!("unknown identifier {name:?}"),
                    })
                }
            }
            other => Err(ParseError {
                pos,
                msg: format!("expected expression, found {other}"),
            }),
        }
    }

    /// Parses call arguments after the opening parenthesis.
    fn call(&mut self, name: &str, name_pos: usize) -> Result<Expr<R>, ParseError> {
        let unary = |p: &mut Self, f: fn(Box<Expr<R>>) -> Expr<R>| {
            let x = p.expr()?;
            p.expect(&Tok::RParen)?;
            Ok(f(Box::new(x)))
        };
        match name {
            "abs" => unary(self, Expr::Abs),
            "sign" => unary(self, Expr::Sign),
            "log" => unary(self, Expr::Log),
            "diff" => unary(self, Expr::Diff),
            "czs" => unary(self, Expr::Czs),
            "crank" => unary(self, Expr::Crank),
            "mean" | "std" | "sum" | "min" | "max" => {
                let op = match name {
                    "mean" => RollOp::Mean,
                    "std" => RollOp::Std,
                    "sum" => RollOp::Sum,
                    "min" => RollOp::Min,
                    _ => RollOp::Max,
                };
                let x = self.expr()?;
                self.expect(&Tok::Comma).map_err(|e| ParseError {
                    pos: e.pos,
                    msg: format!("{name} requires a window argument: {}", e.msg),
                })?;
                let w = self.window()?;
                self.expect(&Tok::RParen)?;
                Ok(Expr::Roll(op, Box::new(x), w))
            }
            "corr" => {
                let x = self.expr()?;
                self.expect(&Tok::Comma)?;
                let y = self.expr()?;
                self.expect(&Tok::Comma).map_err(|e| ParseError {
                    pos: e.pos,
                    msg: format!("corr requires a window argument: {}", e.msg),
                })?;
                let w = self.window()?;
                self.expect(&Tok::RParen)?;
                Ok(Expr::Corr(Box::new(x), Box::new(y), w))
            }
            "lag" => {
                let x = self.expr()?;
                self.expect(&Tok::Comma).map_err(|e| ParseError {
                    pos: e.pos,
                    msg: format!("lag requires an offset argument: {}", e.msg),
                })?;
                let pos = self.pos();
                let k = self.integer()?;
                if k < 1 {
                    return Err(ParseError {
                        pos,
                        msg: format!("lag offset must be >= 1, got {k}"),
                    });
                }
                self.expect(&Tok::RParen)?;
                Ok(Expr::Lag(Box::new(x), k))
            }
            other => Err(ParseError {
                pos: name_pos,
                msg: format!("unknown function {other:?}"),
            }),
        }
    }

    fn window(&mut self) -> Result<usize, ParseError> {
        let pos = self.pos();
        let w = self.integer()?;
        if w < 1 {
            return Err(ParseError {
                pos,
                msg: format!("window must be >= 1, got {w}"),
            });
        }
        Ok(w as usize)
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(raw) => raw.parse::<i64>().map_err(|_| ParseError {
                pos,
                msg: format!("expected an integer literal, got {raw:?}"),
            }),
            other => Err(ParseError {
                pos,
                msg: format!("expected an integer literal, found {other}"),
            }),
        }
    }
}

/// Parses one expression; the whole input must be consumed.
pub fn parse_expression<R: Scalar>(src: &str) -> Result<Expr<R>, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks: &toks,
        at: 0,
        _marker: std::marker::PhantomData,
    };
    let e = p.expr()?;
    if !matches!(p.peek(), Tok::Eof) {
        return Err(ParseError {
            pos: p.pos(),
            msg: format!("unexpected trailing {}", p.peek()),
        });
    }
    Ok(e)
}
