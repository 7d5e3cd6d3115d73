//! Text syntax for polynomials: `3/4*x1 + x2 - 2/5`, `x1*x2`, `x1^2`, `(x - 3/2)^2`.
//!
//! Numbers may be integers, decimals (`0.25`, `1e-3`) or quotients; all are
//! converted to exact rationals. Division is only allowed by constants.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::poly::{Polynomial, VarSpace};

/// A syntax error with a 1-based line and column.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, msg: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }

    /// Shift a position reported relative to a substring into file coordinates.
    pub fn at_offset(mut self, line: usize, col_offset: usize) -> Self {
        self.line = line;
        self.col += col_offset;
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for ParseError {}

/// Parse a decimal or integer literal into an exact rational.
pub fn parse_number(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits.parse().ok()?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut q = BigRational::from_integer(num);
    if scale >= 0 {
        q *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        q /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -q } else { q })
}

/// Parse a rational literal such as `3/4`, `-2`, or `0.125`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    match s.split_once('/') {
        Some((a, b)) => {
            let a = parse_number(a)?;
            let b = parse_number(b)?;
            if b.is_zero() {
                None
            } else {
                Some(a / b)
            }
        }
        None => parse_number(s),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(s: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            out.push((t, col));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-3
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
            let text: String = chars[start..i].iter().collect();
            let q = parse_number(&text)
                .ok_or_else(|| ParseError::new(1, col, format!("invalid number `{text}`")))?;
            out.push((Tok::Num(q), col));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        return Err(ParseError::new(
            1,
            col,
            format!("unexpected character `{c}`"),
        ));
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a VarSpace,
    end_col: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, c)| *c)
            .unwrap_or(self.end_col)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(1, self.col(), msg)
    }

    fn expr(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = acc.add(&t).expect("same space");
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = acc.sub(&t).expect("same space");
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let f = self.unary()?;
                    acc = acc.mul(&f).expect("same space");
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let col = self.col();
                    let f = self.unary()?;
                    if f.degree() > 0 || f.is_zero() {
                        return Err(ParseError::new(
                            1,
                            col,
                            "division is only allowed by a nonzero constant",
                        ));
                    }
                    acc = acc.scale(&(BigRational::one() / f.constant_term()));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Polynomial, ParseError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(self.unary()?.neg())
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            match self.toks.get(self.pos) {
                Some((Tok::Num(q), col)) => {
                    let col = *col;
                    self.pos += 1;
                    if !q.is_integer() || q < &BigRational::zero() {
                        return Err(ParseError::new(1, col, "exponent must be a natural number"));
                    }
                    let k: u32 = q
                        .to_integer()
                        .try_into()
                        .map_err(|_| ParseError::new(1, col, "exponent too large"))?;
                    Ok(base.pow(k))
                }
                _ => Err(self.err("expected an integer exponent after `^`")),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Polynomial, ParseError> {
        let n = self.vars.len();
        match self.toks.get(self.pos).cloned() {
            Some((Tok::Num(q), _)) => {
                self.pos += 1;
                Ok(Polynomial::constant(n, q))
            }
            Some((Tok::Ident(name), col)) => {
                self.pos += 1;
                match self.vars.position(&name) {
                    Some(i) => Ok(Polynomial::var(n, i)),
                    None => Err(ParseError::new(
                        1,
                        col,
                        format!("unknown variable `{name}`"),
                    )),
                }
            }
            Some((Tok::LParen, _)) => {
                self.pos += 1;
                let e = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => Err(self.err("expected `)`")),
                }
            }
            Some((t, _)) => Err(self.err(format!("unexpected token {t:?}"))),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}

/// Parse a polynomial over the given variables. Errors carry line 1 and the column in `s`.
pub fn parse_polynomial(s: &str, vars: &VarSpace) -> Result<Polynomial, ParseError> {
    let toks = lex(s)?;
    if toks.is_empty() {
        return Err(ParseError::new(1, 1, "empty expression"));
    }
    let mut p = Parser {
        toks,
        pos: 0,
        vars,
        end_col: s.chars().count() + 1,
    };
    let out = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(out)
}
