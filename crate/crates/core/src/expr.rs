//! Arithmetic expressions over named lengths and parameters.
//!
//! Grammar: `expr := term (('+'|'-') term)*`, `term := unary (('*'|'/') unary)*`,
//! `unary := '-' unary | atom`, `atom := number unit? | ident | '(' expr ')'`.
//! Units: `in` (25.4), `mm`, `deg` (π/180), `mrad`, `rad`, `nm`, `MHz`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::geometry::INCH;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("unexpected `{found}` at offset {offset} in `{text}`")]
    Unexpected { text: String, offset: usize, found: String },
    #[error("unexpected end of expression `{0}`")]
    UnexpectedEnd(String),
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("expression `{0}` is not finite")]
    NotFinite(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(Box<Expr>, char, Box<Expr>),
}

/// Variable bindings; later scopes shadow earlier ones.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    vars: BTreeMap<String, f64>,
}

impl Scope {
    /// Scope with `inch` and `pi` bound.
    pub fn standard() -> Self {
        let mut s = Scope::default();
        s.set("inch", INCH);
        s.set("pi", std::f64::consts::PI);
        s
    }

    pub fn set(&mut self, name: &str, v: f64) {
        self.vars.insert(name.to_string(), v);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.vars.get(name).copied()
    }

    pub fn with(mut self, name: &str, v: f64) -> Self {
        self.set(name, v);
        self
    }
}

fn unit_factor(u: &str) -> Option<f64> {
    Some(match u {
        "in" => INCH,
        "mm" => 1.0,
        "deg" => std::f64::consts::PI / 180.0,
        "mrad" => 1e-3,
        "rad" => 1.0,
        "nm" => 1.0,
        "MHz" => 1.0,
        _ => return None,
    })
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn unexpected(&self) -> ExprError {
        match self.text[self.pos..].chars().next() {
            Some(c) => ExprError::Unexpected {
                text: self.text.to_string(),
                offset: self.pos,
                found: c.to_string(),
            },
            None => ExprError::UnexpectedEnd(self.text.to_string()),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(Box::new(lhs), c as char, Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(Box::new(lhs), c as char, Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek() == Some(b'+') {
            self.pos += 1;
            return self.unary();
        }
        self.atom()
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_' || self.bytes[self.pos] == b'.')
        {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.unexpected());
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.') {
                    self.pos += 1;
                }
                if self.pos < self.bytes.len() && (self.bytes[self.pos] == b'e' || self.bytes[self.pos] == b'E') {
                    let save = self.pos;
                    self.pos += 1;
                    if self.pos < self.bytes.len() && (self.bytes[self.pos] == b'-' || self.bytes[self.pos] == b'+') {
                        self.pos += 1;
                    }
                    if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                            self.pos += 1;
                        }
                    } else {
                        self.pos = save;
                    }
                }
                let lit = &self.text[start..self.pos];
                let v: f64 = lit.parse().map_err(|_| ExprError::Unexpected {
                    text: self.text.to_string(),
                    offset: start,
                    found: lit.to_string(),
                })?;
                if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphabetic() {
                    let u = self.ident();
                    let k = unit_factor(u).ok_or_else(|| ExprError::UnknownUnit(u.to_string()))?;
                    return Ok(Expr::Num(v * k));
                }
                Ok(Expr::Num(v))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => Ok(Expr::Var(self.ident().to_string())),
            _ => Err(self.unexpected()),
        }
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        let mut p = Parser {
            text,
            bytes: text.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        if p.peek().is_some() {
            return Err(p.unexpected());
        }
        Ok(e)
    }

    pub fn eval(&self, scope: &Scope) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(n) => scope.get(n).ok_or_else(|| ExprError::UnknownName(n.clone()))?,
            Expr::Neg(e) => -e.eval(scope)?,
            Expr::Bin(a, op, b) => {
                let (x, y) = (a.eval(scope)?, b.eval(scope)?);
                match op {
                    '+' => x + y,
                    '-' => x - y,
                    '*' => x * y,
                    _ => x / y,
                }
            }
        };
        if !v.is_finite() {
            return Err(ExprError::NotFinite(self.to_string()));
        }
        Ok(v)
    }

    /// Names referenced by the expression.
    pub fn variables(&self, out: &mut Vec<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(n) => out.push(n.clone()),
            Expr::Neg(e) => e.variables(out),
            Expr::Bin(a, _, b) => {
                a.variables(out);
                b.variables(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(n) => f.write_str(n),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Bin(a, op, b) => write!(f, "({a}{op}{b})"),
        }
    }
}

/// Parses and evaluates in one step.
pub fn eval_str(text: &str, scope: &Scope) -> Result<f64, ExprError> {
    Expr::parse(text)?.eval(scope)
}
