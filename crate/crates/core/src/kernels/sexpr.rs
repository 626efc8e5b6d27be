//! Text form of kernel trees.
//!
//! ```text
//! expr := "(" "rbf" num ")" | "(" "matern12" num ")" | "(" "matern32" num ")"
//!       | "(" "matern52" num ")" | "(" "periodic" lengthscale period ")"
//!       | "(" "linear" variance ")" | "(" "scale" outputscale expr ")"
//!       | "(" "+" expr expr+ ")" | "(" "*" expr expr+ ")"
//! ```
//!
//! `+` and `*` with more than two operands fold to the left. Numbers use
//! Rust float syntax; `Display` prints the shortest representation that
//! parses back to the same value.

use std::fmt;
use std::str::FromStr;

use super::KernelExpr;
use crate::error::{GpError, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Option<(usize, Tok<'a>)> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= bytes.len() {
            return None;
        }
        let start = self.pos;
        match bytes[start] {
            b'(' => {
                self.pos += 1;
                Some((start, Tok::Open))
            }
            b')' => {
                self.pos += 1;
                Some((start, Tok::Close))
            }
            _ => {
                while self.pos < bytes.len()
                    && !bytes[self.pos].is_ascii_whitespace()
                    && bytes[self.pos] != b'('
                    && bytes[self.pos] != b')'
                {
                    self.pos += 1;
                }
                Some((start, Tok::Atom(&self.src[start..self.pos])))
            }
        }
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<Option<(usize, Tok<'a>)>>,
}

fn err(position: usize, token: &str, message: impl Into<String>) -> GpError {
    GpError::Parse {
        position,
        token: token.to_string(),
        message: message.into(),
    }
}

fn tok_text<'a>(t: &Tok<'a>) -> &'a str {
    match t {
        Tok::Open => "(",
        Tok::Close => ")",
        Tok::Atom(s) => s,
    }
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Option<(usize, Tok<'a>)> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next());
        }
        self.peeked.clone().flatten()
    }

    fn bump(&mut self) -> Option<(usize, Tok<'a>)> {
        match self.peeked.take() {
            Some(t) => t,
            None => self.lexer.next(),
        }
    }

    fn end(&self) -> usize {
        self.lexer.src.len()
    }

    fn expect_close(&mut self) -> Result<()> {
        match self.bump() {
            Some((_, Tok::Close)) => Ok(()),
            Some((p, t)) => Err(err(p, tok_text(&t), "expected `)`")),
            None => Err(err(self.end(), "", "unexpected end of input, expected `)`")),
        }
    }

    fn number(&mut self) -> Result<f64> {
        match self.bump() {
            Some((p, Tok::Atom(s))) => {
                let v: f64 = s.parse().map_err(|_| err(p, s, "expected a number"))?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(err(p, s, "hyperparameters must be finite and positive"));
                }
                Ok(v)
            }
            Some((p, t)) => Err(err(p, tok_text(&t), "expected a number")),
            None => Err(err(self.end(), "", "unexpected end of input, expected a number")),
        }
    }

    fn expr(&mut self) -> Result<KernelExpr> {
        match self.bump() {
            Some((_, Tok::Open)) => {}
            Some((p, t)) => return Err(err(p, tok_text(&t), "expected `(`")),
            None => return Err(err(self.end(), "", "unexpected end of input, expected `(`")),
        }
        let (pos, head) = match self.bump() {
            Some((p, Tok::Atom(s))) => (p, s),
            Some((p, t)) => return Err(err(p, tok_text(&t), "expected a kernel name")),
            None => return Err(err(self.end(), "", "unexpected end of input")),
        };
        let k = match head {
            "rbf" => KernelExpr::Rbf {
                lengthscale: self.number()?,
            },
            "matern12" => KernelExpr::Matern12 {
                lengthscale: self.number()?,
            },
            "matern32" => KernelExpr::Matern32 {
                lengthscale: self.number()?,
            },
            "matern52" => KernelExpr::Matern52 {
                lengthscale: self.number()?,
            },
            "periodic" => {
                let lengthscale = self.number()?;
                let period = self.number()?;
                KernelExpr::Periodic { lengthscale, period }
            }
            "linear" => KernelExpr::Linear {
                variance: self.number()?,
            },
            "scale" => {
                let outputscale = self.number()?;
                KernelExpr::Scale {
                    outputscale,
                    child: Box::new(self.expr()?),
                }
            }
            "+" | "*" => {
                let mut acc = self.expr()?;
                let mut operands = 1;
                while let Some((_, Tok::Open)) = self.peek() {
                    let rhs = self.expr()?;
                    acc = if head == "+" {
                        KernelExpr::sum(acc, rhs)
                    } else {
                        KernelExpr::product(acc, rhs)
                    };
                    operands += 1;
                }
                if operands < 2 {
                    return Err(err(pos, head, "combinator needs at least two operands"));
                }
                acc
            }
            other => return Err(err(pos, other, "unknown kernel")),
        };
        self.expect_close()?;
        Ok(k)
    }
}

/// Parses the s-expression form of a kernel.
pub fn parse_kernel(src: &str) -> Result<KernelExpr> {
    let mut p = Parser {
        lexer: Lexer { src, pos: 0 },
        peeked: None,
    };
    let k = p.expr()?;
    if let Some((pos, t)) = p.bump() {
        return Err(err(pos, tok_text(&t), "trailing input"));
    }
    Ok(k)
}

impl FromStr for KernelExpr {
    type Err = GpError;
    fn from_str(s: &str) -> Result<Self> {
        parse_kernel(s)
    }
}

impl fmt::Display for KernelExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use KernelExpr::*;
        match self {
            Rbf { lengthscale } => write!(f, "(rbf {lengthscale})"),
            Matern12 { lengthscale } => write!(f, "(matern12 {lengthscale})"),
            Matern32 { lengthscale } => write!(f, "(matern32 {lengthscale})"),
            Matern52 { lengthscale } => write!(f, "(matern52 {lengthscale})"),
            Periodic { lengthscale, period } => write!(f, "(periodic {lengthscale} {period})"),
            Linear { variance } => write!(f, "(linear {variance})"),
            Scale { outputscale, child } => write!(f, "(scale {outputscale} {child})"),
            Sum(a, b) => write!(f, "(+ {a} {b})"),
            Product(a, b) => write!(f, "(* {a} {b})"),
        }
    }
}
