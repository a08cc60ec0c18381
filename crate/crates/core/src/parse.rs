//! Plain-text polynomial syntax shared by phase-space polynomials and algebra
//! elements: `3/2 q^2 p - j p^3`, `2 ad^2 a + (1 + j) b`.
//!
//! Juxtaposition and `*` both multiply, in the order written. `j` is the
//! imaginary unit; every other identifier is resolved by the target type.

use crate::error::{Error, Result};
use crate::scalar::{parse_rational, Coeff, Exact, Rational};

trait DivRational {
    fn div_rational(self, d: &Rational) -> Exact;
}

impl DivRational for Exact {
    fn div_rational(self, d: &Rational) -> Exact {
        Exact::new(&self.re / d, &self.im / d)
    }
}

pub trait ParseTarget: Sized {
    /// Session data needed to resolve identifiers (e.g. `kT`).
    type Context;
    fn constant(c: Exact) -> Self;
    fn variable(ctx: &Self::Context, name: &str) -> Option<Self>;
    fn add(self, other: Self) -> Self;
    fn sub(self, other: Self) -> Self;
    fn mul(self, other: Self) -> Self;
}

const MAX_EXPONENT: u32 = 64;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(input: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((start, Tok::Plus));
                i += 1
            }
            '-' => {
                out.push((start, Tok::Minus));
                i += 1
            }
            '*' => {
                out.push((start, Tok::Star));
                i += 1
            }
            '/' => {
                out.push((start, Tok::Slash));
                i += 1
            }
            '^' => {
                out.push((start, Tok::Caret));
                i += 1
            }
            '(' => {
                out.push((start, Tok::LParen));
                i += 1
            }
            ')' => {
                out.push((start, Tok::RParen));
                i += 1
            }
            c if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                let after_caret = matches!(out.last(), Some((_, Tok::Caret)));
                if !after_caret && i + 1 < bytes.len() && bytes[i] == b'/' && (bytes[i + 1] as char).is_ascii_digit() {
                    i += 1;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
                out.push((start, Tok::Num(input[start..i].to_string())));
            }
            c if c.is_ascii_alphabetic() => {
                while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(input[start..i].to_string())));
            }
            other => {
                return Err(Error::Parse {
                    offset: start,
                    message: format!("unexpected character '{other}'"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a, C> {
    ctx: &'a C,
    toks: &'a [(usize, Tok)],
    pos: usize,
    len: usize,
}

impl<'a, C> Parser<'a, C> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.len)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expr<T: ParseTarget<Context = C>>(&mut self) -> Result<T> {
        let negate = match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                true
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                false
            }
            _ => false,
        };
        let first = self.term::<T>()?;
        let mut acc = if negate { T::constant(Exact::zero()).sub(first) } else { first };
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let t = self.term::<T>()?;
                    acc = acc.add(t);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let t = self.term::<T>()?;
                    acc = acc.sub(t);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term<T: ParseTarget<Context = C>>(&mut self) -> Result<T> {
        let mut acc = self.factor::<T>()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let f = self.factor::<T>()?;
                    acc = acc.mul(f);
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let den = match self.peek() {
                        Some(Tok::Num(s)) => parse_rational(s),
                        _ => None,
                    };
                    match den {
                        Some(d) if !num_traits::Zero::is_zero(&d) => {
                            self.pos += 1;
                            let inv = Exact::new(num_traits::One::one(), num_traits::Zero::zero()).div_rational(&d);
                            acc = acc.mul(T::constant(inv));
                        }
                        _ => return self.err("division only by a non-zero number"),
                    }
                }
                Some(Tok::Num(_)) | Some(Tok::Ident(_)) | Some(Tok::LParen) => {
                    let f = self.factor::<T>()?;
                    acc = acc.mul(f);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor<T: ParseTarget<Context = C>>(&mut self) -> Result<T> {
        let base_pos = self.pos;
        let base = self.atom::<T>()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let exp = match self.peek() {
            Some(Tok::Num(s)) => s.parse::<u32>().ok(),
            _ => None,
        };
        let Some(exp) = exp else {
            return self.err("exponent must be a non-negative integer");
        };
        if exp > MAX_EXPONENT {
            return self.err(format!("exponent {exp} exceeds {MAX_EXPONENT}"));
        }
        self.pos += 1;
        if exp == 0 {
            return Ok(T::constant(Exact::one()));
        }
        // Re-parse the base for each power so non-Clone targets work.
        let mut acc = base;
        for _ in 1..exp {
            let save = self.pos;
            self.pos = base_pos;
            let again = self.atom::<T>()?;
            self.pos = save;
            acc = acc.mul(again);
        }
        Ok(acc)
    }

    fn atom<T: ParseTarget<Context = C>>(&mut self) -> Result<T> {
        match self.peek().cloned() {
            Some(Tok::Num(s)) => {
                let Some(r) = parse_rational(&s) else {
                    return self.err(format!("bad number '{s}'"));
                };
                self.pos += 1;
                Ok(T::constant(Exact::new(r, num_traits::Zero::zero())))
            }
            Some(Tok::Ident(name)) => {
                if name == "j" {
                    self.pos += 1;
                    return Ok(T::constant(Exact::imag_unit()));
                }
                match T::variable(self.ctx, &name) {
                    Some(v) => {
                        self.pos += 1;
                        Ok(v)
                    }
                    None => self.err(format!("unknown symbol '{name}'")),
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr::<T>()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(t) => self.err(format!("unexpected token {t:?}")),
            None => self.err("unexpected end of input"),
        }
    }
}

pub fn parse_expression<T: ParseTarget<Context = ()>>(input: &str) -> Result<T> {
    parse_expression_with(input, &())
}

pub fn parse_expression_with<T: ParseTarget>(input: &str, ctx: &T::Context) -> Result<T> {
    let toks = lex(input)?;
    if toks.is_empty() {
        return Err(Error::Parse {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        ctx,
        toks: &toks,
        pos: 0,
        len: input.len(),
    };
    let value = p.expr::<T>()?;
    if p.pos != toks.len() {
        return p.err("trailing input");
    }
    Ok(value)
}
