//! Polynomial text grammar.
//!
//! ```text
//! expr    := ['+'|'-'] term (('+'|'-') term)*
//! term    := factor ('*' factor)*
//! factor  := '-' factor | primary ('^' integer)?
//! primary := number ['i'] | 'i' | variable | '(' expr ')'
//! ```
//!
//! A complex literal such as `(1-2i)` is just a parenthesised expression.
//! Whitespace is insignificant.

use num_complex::Complex64;

use super::Poly;
use crate::error::{Error, Result};

/// Variable naming scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarNames {
    /// `x1 .. xN`.
    Real(usize),
    /// `w1 .. wm` followed by their conjugates `wb1 .. wbm`; `2m` variables.
    Complex(usize),
}

impl VarNames {
    pub fn nvars(&self) -> usize {
        match *self {
            VarNames::Real(n) => n,
            VarNames::Complex(m) => 2 * m,
        }
    }

    pub fn name(&self, i: usize) -> String {
        match *self {
            VarNames::Real(_) => format!("x{}", i + 1),
            VarNames::Complex(m) if i < m => format!("w{}", i + 1),
            VarNames::Complex(m) => format!("wb{}", i - m + 1),
        }
    }

    fn lookup(&self, ident: &str) -> Option<usize> {
        let (prefix, offset) = match *self {
            VarNames::Real(_) => ("x", 0),
            VarNames::Complex(m) => {
                if ident.starts_with("wb") {
                    ("wb", m)
                } else {
                    ("w", 0)
                }
            }
        };
        let idx: usize = ident.strip_prefix(prefix)?.parse().ok()?;
        let bound = match *self {
            VarNames::Real(n) => n,
            VarNames::Complex(m) => m,
        };
        (1..=bound).contains(&idx).then(|| idx - 1 + offset)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Imag(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn err(pos: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        location: format!("char {}", pos + 1),
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let start = i;
        match ch {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '+' => out.push((start, Tok::Plus)),
            '-' => out.push((start, Tok::Minus)),
            '*' => out.push((start, Tok::Star)),
            '^' => out.push((start, Tok::Caret)),
            '(' => out.push((start, Tok::LParen)),
            ')' => out.push((start, Tok::RParen)),
            c if c.is_ascii_digit() || c == '.' => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // exponent part, only when followed by digits
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit: String = chars[start..i].iter().collect();
                let value: f64 = lit
                    .parse()
                    .map_err(|_| err(start, format!("bad number `{lit}`")))?;
                if i < chars.len()
                    && chars[i] == 'i'
                    && !chars.get(i + 1).is_some_and(|c| c.is_ascii_alphanumeric())
                {
                    i += 1;
                    out.push((start, Tok::Imag(value)));
                } else {
                    out.push((start, Tok::Num(value)));
                }
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                let ident: String = chars[start..i].iter().collect();
                if ident == "i" {
                    out.push((start, Tok::Imag(1.0)));
                } else {
                    out.push((start, Tok::Ident(ident)));
                }
                continue;
            }
            other => return Err(err(start, format!("unexpected character `{other}`"))),
        }
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    names: &'a VarNames,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn nvars(&self) -> usize {
        self.names.nvars()
    }

    fn expr(&mut self) -> Result<Poly> {
        let mut acc = match self.peek() {
            Some(Tok::Minus) => {
                self.next();
                -self.term()?
            }
            Some(Tok::Plus) => {
                self.next();
                self.term()?
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    acc = acc + self.term()?;
                }
                Some(Tok::Minus) => {
                    self.next();
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Poly> {
        let mut acc = self.factor()?;
        while self.peek() == Some(&Tok::Star) {
            self.next();
            let rhs = self.factor()?;
            acc = &acc * &rhs;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Poly> {
        if self.peek() == Some(&Tok::Minus) {
            self.next();
            return Ok(-self.factor()?);
        }
        let base = self.primary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.next();
            let at = self.here();
            match self.next() {
                Some(Tok::Num(v)) if v >= 0.0 && v.fract() == 0.0 && v <= 64.0 => {
                    Ok(base.pow(v as u32))
                }
                _ => Err(err(at, "exponent must be a nonnegative integer")),
            }
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Poly> {
        let at = self.here();
        match self.next() {
            Some(Tok::Num(v)) => Ok(Poly::constant(self.nvars(), v)),
            Some(Tok::Imag(v)) => Ok(Poly::constant(self.nvars(), Complex64::new(0.0, v))),
            Some(Tok::Ident(name)) => match self.names.lookup(&name) {
                Some(i) => Ok(Poly::var(self.nvars(), i)),
                None => Err(err(at, format!("unknown variable `{name}`"))),
            },
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                let close = self.here();
                match self.next() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => Err(err(close, "expected `)`")),
                }
            }
            Some(t) => Err(err(at, format!("unexpected token {t:?}"))),
            None => Err(err(at, "unexpected end of input")),
        }
    }
}

pub(super) fn parse(text: &str, names: &VarNames) -> Result<Poly> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(err(0, "empty polynomial"));
    }
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.chars().count(),
        names,
    };
    let out = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(err(p.here(), "trailing input"));
    }
    Ok(out)
}
