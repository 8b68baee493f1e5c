//! Recursive-descent parser for the PDE grammar.
//!
//! ```text
//! equation := expr "=" expr
//! expr     := term (("+" | "-") term)*
//! term     := unary (("*" | "/") unary)*
//! unary    := "-" unary | factor
//! factor   := base ("^" exponent)?
//! base     := number | coord | deriv | func "(" expr ("," expr)* ")" | "(" expr ")"
//! deriv    := "d" coord+ "(u)" | "D[" int ("," int)* "](u)" | "u"
//! ```

use super::{Exponent, Expr, Func, OperatorSpec, Rhs};
use crate::multi_index::MultiIndex;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("dimension mismatch at byte {offset}: {message}")]
    DimensionMismatch { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::DimensionMismatch { offset, .. }
            | ParseError::UnknownFunction { offset, .. } => *offset,
        }
    }
}

const CANONICAL_COORDS: [&str; 4] = ["t", "x", "y", "z"];

/// Parse an equation, inferring the coordinates from the tokens present.
///
/// Single-letter coordinates are taken from `t, x, y, z` in that order. A
/// source using only `D[...]` tokens gets `x` (n = 1), `t, x` (n = 2) or
/// `t, x, y` (n = 3); a source with no coordinate information at all is
/// one-dimensional in `x`.
pub fn parse(source: &str) -> Result<OperatorSpec, ParseError> {
    let (lhs, rhs) = parse_raw_equation(source)?;
    let coords = infer_coords(&lhs, &rhs)?;
    build(lhs, rhs, coords)
}

/// Parse an equation against declared coordinate names.
pub fn parse_with_coords(source: &str, coords: &[String]) -> Result<OperatorSpec, ParseError> {
    if coords.is_empty() {
        return Err(ParseError::DimensionMismatch {
            offset: 0,
            message: "at least one coordinate must be declared".into(),
        });
    }
    let (lhs, rhs) = parse_raw_equation(source)?;
    build(lhs, rhs, coords.to_vec())
}

/// Parse a bare expression (no `=`) over declared coordinates.
pub fn parse_expr(source: &str, coords: &[String]) -> Result<Expr, ParseError> {
    let mut p = Parser::new(source);
    let raw = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    resolve(&raw, coords, true)
}

fn parse_raw_equation(source: &str) -> Result<(Raw, Raw), ParseError> {
    let mut p = Parser::new(source);
    let lhs = p.expr()?;
    p.skip_ws();
    if !p.eat(b'=') {
        return Err(p.err("expected `=`"));
    }
    let rhs = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok((lhs, rhs))
}

fn build(lhs: Raw, rhs: Raw, coords: Vec<String>) -> Result<OperatorSpec, ParseError> {
    let lhs = resolve(&lhs, &coords, false)?;
    let rhs_expr = resolve(&rhs, &coords, true)?;
    let rhs_has_jets = !rhs_expr.jet_variables().is_empty();
    let (lhs, rhs) = match rhs_expr {
        Expr::Label(l) => (lhs, Rhs::Label(l)),
        e if rhs_has_jets => {
            if !e.labels().is_empty() {
                return Err(ParseError::Syntax {
                    offset: 0,
                    message: "right side mixing the unknown with a label".into(),
                });
            }
            (Expr::Sub(Box::new(lhs), Box::new(e)), Rhs::Expr(Expr::Const(0.0)))
        }
        e => {
            if !e.labels().is_empty() {
                return Err(ParseError::Syntax {
                    offset: 0,
                    message: "a right-hand label must stand alone".into(),
                });
            }
            (lhs, Rhs::Expr(e))
        }
    };
    Ok(OperatorSpec::new(coords, lhs, rhs))
}

#[derive(Debug, Clone)]
enum DerivSpec {
    Letters(String),
    Index(Vec<u32>),
}

#[derive(Debug, Clone)]
enum Raw {
    Num(f64),
    Name(String, usize),
    U,
    Deriv(DerivSpec, usize),
    Neg(Box<Raw>),
    Bin(u8, Box<Raw>, Box<Raw>),
    Pow(Box<Raw>, Exponent),
    Call(Func, Vec<Raw>),
}

fn infer_coords(lhs: &Raw, rhs: &Raw) -> Result<Vec<String>, ParseError> {
    let mut letters = Vec::new();
    let mut index_len: Option<(usize, usize)> = None;
    let mut err = None;
    for raw in [lhs, rhs] {
        walk(raw, &mut |r| match r {
            Raw::Name(n, _) if CANONICAL_COORDS.contains(&n.as_str()) => letters.push(n.clone()),
            Raw::Deriv(DerivSpec::Letters(l), off) => {
                for c in l.chars() {
                    let s = c.to_string();
                    if CANONICAL_COORDS.contains(&s.as_str()) {
                        letters.push(s);
                    } else if err.is_none() {
                        err = Some(ParseError::DimensionMismatch {
                            offset: *off,
                            message: format!("`{c}` is not a coordinate"),
                        });
                    }
                }
            }
            Raw::Deriv(DerivSpec::Index(ix), off) => match index_len {
                Some((len, _)) if len != ix.len() => {
                    if err.is_none() {
                        err = Some(ParseError::DimensionMismatch {
                            offset: *off,
                            message: format!("D[...] has {} entries, expected {len}", ix.len()),
                        });
                    }
                }
                _ => index_len = Some((ix.len(), *off)),
            },
            _ => {}
        });
    }
    if let Some(e) = err {
        return Err(e);
    }
    let coords: Vec<String> = CANONICAL_COORDS
        .iter()
        .filter(|c| letters.iter().any(|l| l == *c))
        .map(|c| c.to_string())
        .collect();
    match (coords.is_empty(), index_len) {
        (true, None) => Ok(vec!["x".into()]),
        (true, Some((len, off))) => match len {
            1 => Ok(vec!["x".into()]),
            2 => Ok(vec!["t".into(), "x".into()]),
            3 => Ok(vec!["t".into(), "x".into(), "y".into()]),
            _ => Err(ParseError::DimensionMismatch {
                offset: off,
                message: "declare coordinates for more than three dimensions".into(),
            }),
        },
        (false, Some((len, off))) if len != coords.len() => Err(ParseError::DimensionMismatch {
            offset: off,
            message: format!("D[...] has {len} entries but {} coordinates are used", coords.len()),
        }),
        _ => Ok(coords),
    }
}

fn walk(r: &Raw, f: &mut impl FnMut(&Raw)) {
    f(r);
    match r {
        Raw::Neg(a) | Raw::Pow(a, _) => walk(a, f),
        Raw::Bin(_, a, b) => {
            walk(a, f);
            walk(b, f);
        }
        Raw::Call(_, args) => args.iter().for_each(|a| walk(a, f)),
        _ => {}
    }
}

fn resolve(raw: &Raw, coords: &[String], allow_labels: bool) -> Result<Expr, ParseError> {
    let n = coords.len();
    let rec = |r: &Raw| resolve(r, coords, allow_labels);
    Ok(match raw {
        Raw::Num(v) => Expr::Const(*v),
        Raw::U => Expr::Jet(MultiIndex::zero(n)),
        Raw::Name(name, off) => {
            if let Some(i) = coords.iter().position(|c| c == name) {
                Expr::Coord(i)
            } else if name == "pi" {
                Expr::Const(std::f64::consts::PI)
            } else if CANONICAL_COORDS.contains(&name.as_str()) {
                return Err(ParseError::DimensionMismatch {
                    offset: *off,
                    message: format!("coordinate `{name}` is not declared"),
                });
            } else if allow_labels {
                Expr::Label(name.clone())
            } else {
                return Err(ParseError::Syntax {
                    offset: *off,
                    message: format!("unknown identifier `{name}`"),
                });
            }
        }
        Raw::Deriv(spec, off) => {
            let entries = match spec {
                DerivSpec::Index(ix) => {
                    if ix.len() != n {
                        return Err(ParseError::DimensionMismatch {
                            offset: *off,
                            message: format!("D[...] has {} entries, expected {n}", ix.len()),
                        });
                    }
                    ix.clone()
                }
                DerivSpec::Letters(letters) => {
                    let mut e = vec![0u32; n];
                    for c in letters.chars() {
                        let s = c.to_string();
                        match coords.iter().position(|k| *k == s) {
                            Some(i) => e[i] += 1,
                            None => {
                                return Err(ParseError::DimensionMismatch {
                                    offset: *off,
                                    message: format!("derivative names undeclared coordinate `{c}`"),
                                })
                            }
                        }
                    }
                    e
                }
            };
            Expr::Jet(MultiIndex::new(entries))
        }
        Raw::Neg(a) => Expr::Neg(Box::new(rec(a)?)),
        Raw::Bin(op, a, b) => {
            let (a, b) = (Box::new(rec(a)?), Box::new(rec(b)?));
            match op {
                b'+' => Expr::Add(a, b),
                b'-' => Expr::Sub(a, b),
                b'*' => Expr::Mul(a, b),
                _ => Expr::Div(a, b),
            }
        }
        Raw::Pow(a, e) => Expr::Pow(Box::new(rec(a)?), *e),
        Raw::Call(func, args) => Expr::Call(*func, args.iter().map(rec).collect::<Result<_, _>>()?),
    })
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(s: &'a str) -> Self {
        Parser {
            src: s.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, msg: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Raw, ParseError> {
        let mut lhs = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Raw::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Raw, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Raw::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Raw, ParseError> {
        if self.eat(b'-') {
            Ok(Raw::Neg(Box::new(self.unary()?)))
        } else {
            self.factor()
        }
    }

    fn factor(&mut self) -> Result<Raw, ParseError> {
        let base = self.base()?;
        if self.eat(b'^') {
            let e = self.exponent()?;
            Ok(Raw::Pow(Box::new(base), e))
        } else {
            Ok(base)
        }
    }

    fn exponent(&mut self) -> Result<Exponent, ParseError> {
        let start = self.pos;
        if self.eat(b'(') {
            let neg = self.eat(b'-');
            let num = self.integer()?;
            let den = if self.eat(b'/') { self.integer()? } else { 1 };
            self.expect(b')')?;
            let num = if neg { -num } else { num };
            return Exponent::new(num, den).ok_or(ParseError::Syntax {
                offset: start,
                message: "zero denominator in exponent".into(),
            });
        }
        let neg = self.eat(b'-');
        self.skip_ws();
        let s = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[s..self.pos]).unwrap_or("");
        if text.is_empty() {
            return Err(self.err("expected rational exponent"));
        }
        let (int, frac) = text.split_once('.').unwrap_or((text, ""));
        if frac.contains('.') || (int.is_empty() && frac.is_empty()) {
            return Err(ParseError::Syntax {
                offset: s,
                message: "malformed exponent".into(),
            });
        }
        let digits = format!("{int}{frac}");
        let num: i64 = digits.parse().map_err(|_| ParseError::Syntax {
            offset: s,
            message: "exponent out of range".into(),
        })?;
        let den = 10i64.checked_pow(frac.len() as u32).ok_or(ParseError::Syntax {
            offset: s,
            message: "exponent out of range".into(),
        })?;
        Exponent::new(if neg { -num } else { num }, den).ok_or(ParseError::Syntax {
            offset: start,
            message: "malformed exponent".into(),
        })
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        self.skip_ws();
        let s = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if s == self.pos {
            return Err(self.err("expected integer"));
        }
        std::str::from_utf8(&self.src[s..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| ParseError::Syntax {
                offset: s,
                message: "integer out of range".into(),
            })
    }

    fn number(&mut self) -> Result<Raw, ParseError> {
        let s = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let ds = self.pos;
            digits(self);
            if ds == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[s..self.pos]).unwrap();
        text.parse::<f64>().map(Raw::Num).map_err(|_| ParseError::Syntax {
            offset: s,
            message: format!("malformed number `{text}`"),
        })
    }

    fn ident(&mut self) -> String {
        let s = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[s..self.pos]).into_owned()
    }

    /// `"(" "u" ")"` after a derivative token.
    fn deriv_arg(&mut self) -> Result<(), ParseError> {
        self.expect(b'(')?;
        self.skip_ws();
        let s = self.pos;
        let id = self.ident();
        if id != "u" {
            self.pos = s;
            return Err(self.err("derivatives apply to the unknown `u` only"));
        }
        self.expect(b')')
    }

    fn base(&mut self) -> Result<Raw, ParseError> {
        let c = match self.peek() {
            Some(c) => c,
            None => return Err(self.err("unexpected end of input")),
        };
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        if !c.is_ascii_alphabetic() {
            return Err(self.err(&format!("unexpected character `{}`", c as char)));
        }
        let start = self.pos;
        let id = self.ident();
        if id == "u" {
            return Ok(Raw::U);
        }
        if id == "D" && self.peek() == Some(b'[') {
            self.pos += 1;
            let mut ix = vec![self.integer()? as u32];
            while self.eat(b',') {
                ix.push(self.integer()? as u32);
            }
            self.expect(b']')?;
            self.deriv_arg()?;
            return Ok(Raw::Deriv(DerivSpec::Index(ix), start));
        }
        let followed_by_paren = self.peek() == Some(b'(');
        if followed_by_paren {
            if let Some(func) = Func::from_name(&id) {
                self.pos += 1;
                let mut args = vec![self.expr()?];
                while self.eat(b',') {
                    args.push(self.expr()?);
                }
                self.expect(b')')?;
                if args.len() != func.arity() {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: format!("`{}` takes {} argument(s)", func.name(), func.arity()),
                    });
                }
                return Ok(Raw::Call(func, args));
            }
            if id.len() >= 2 && id.starts_with('d') {
                self.deriv_arg()?;
                return Ok(Raw::Deriv(DerivSpec::Letters(id[1..].to_string()), start));
            }
            return Err(ParseError::UnknownFunction { offset: start, name: id });
        }
        Ok(Raw::Name(id, start))
    }
}
