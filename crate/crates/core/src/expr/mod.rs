//! Nonlinear PDE expressions: grammar, operator specs and evaluation.
//!
//! An operator is written as an equation `lhs = rhs`, for example
//! `dt(u) + u*dx(u) = 0` or `dxx(u) + dyy(u) = f`. The left side is the
//! function `F(x, u, ..., D^p u, ...)`; the right side is either a label for a
//! field supplied elsewhere or an expression in the coordinates alone.

mod eval;
mod parser;
pub mod series;

use crate::multi_index::MultiIndex;
use std::collections::BTreeSet;
use std::fmt;

pub use eval::{eval_scalar, Env, EvalFault, Scalar};
pub use parser::{parse, parse_expr, parse_with_coords, ParseError};

/// Primitive functions allowed inside an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Min,
    Max,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Rational exponent `num/den`, `den > 0`, stored in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exponent {
    pub num: i64,
    pub den: i64,
}

impl Exponent {
    pub fn new(num: i64, den: i64) -> Option<Exponent> {
        if den == 0 {
            return None;
        }
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        let s = den.signum();
        Some(Exponent {
            num: s * num / g.max(1),
            den: s * den / g.max(1),
        })
    }

    pub fn integer(k: i64) -> Exponent {
        Exponent { num: k, den: 1 }
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Expression tree. Finite and acyclic by construction (owned boxes).
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// The `i`-th coordinate.
    Coord(usize),
    /// `D^p u`; `p = 0` is `u` itself.
    Jet(MultiIndex),
    /// A named right-hand field such as `f`.
    Label(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Exponent),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Neg(a) | Expr::Pow(a, _) => a.visit(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit(f)),
            Expr::Const(_) | Expr::Coord(_) | Expr::Jet(_) | Expr::Label(_) => {}
        }
    }

    pub fn jet_variables(&self) -> BTreeSet<MultiIndex> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Jet(p) = e {
                out.insert(p.clone());
            }
        });
        out
    }

    pub fn labels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Label(l) = e {
                out.insert(l.clone());
            }
        });
        out
    }

    /// Render with full parenthesisation using the given coordinate names.
    pub fn pretty(&self, coords: &[String]) -> String {
        let mut s = String::new();
        self.write_pretty(coords, &mut s);
        s
    }

    fn write_pretty(&self, coords: &[String], s: &mut String) {
        use std::fmt::Write;
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    let _ = write!(s, "(-{:?})", -c);
                } else {
                    let _ = write!(s, "{c:?}");
                }
            }
            Expr::Coord(i) => s.push_str(&coords[*i]),
            Expr::Jet(p) => {
                if p.degree() == 0 {
                    s.push('u');
                } else {
                    s.push_str("D[");
                    for (i, k) in p.entries().iter().enumerate() {
                        if i > 0 {
                            s.push(',');
                        }
                        let _ = write!(s, "{k}");
                    }
                    s.push_str("](u)");
                }
            }
            Expr::Label(l) => s.push_str(l),
            Expr::Neg(a) => {
                s.push_str("(-");
                a.write_pretty(coords, s);
                s.push(')');
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let op = match self {
                    Expr::Add(..) => '+',
                    Expr::Sub(..) => '-',
                    Expr::Mul(..) => '*',
                    _ => '/',
                };
                s.push('(');
                a.write_pretty(coords, s);
                s.push(op);
                b.write_pretty(coords, s);
                s.push(')');
            }
            Expr::Pow(a, e) => {
                s.push('(');
                a.write_pretty(coords, s);
                if e.is_integer() && e.num >= 0 {
                    let _ = write!(s, "^{})", e.num);
                } else {
                    let _ = write!(s, "^({}/{}))", e.num, e.den);
                }
            }
            Expr::Call(func, args) => {
                s.push_str(func.name());
                s.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    a.write_pretty(coords, s);
                }
                s.push(')');
            }
        }
    }
}

/// Right-hand side of an operator equation.
#[derive(Clone, Debug, PartialEq)]
pub enum Rhs {
    /// A field named in the source and bound by the caller.
    Label(String),
    /// An expression in the coordinates only.
    Expr(Expr),
}

/// Parsed operator `T(x, D) u = f` of order `m` in `n` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSpec {
    coords: Vec<String>,
    order: u32,
    lhs: Expr,
    rhs: Rhs,
}

impl OperatorSpec {
    pub(crate) fn new(coords: Vec<String>, lhs: Expr, rhs: Rhs) -> Self {
        let order = lhs.jet_variables().iter().map(MultiIndex::degree).max().unwrap_or(0);
        OperatorSpec {
            coords,
            order,
            lhs,
            rhs,
        }
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn lhs(&self) -> &Expr {
        &self.lhs
    }

    pub fn rhs(&self) -> &Rhs {
        &self.rhs
    }

    /// `Some(name)` when the right-hand side is a named field.
    pub fn rhs_label(&self) -> Option<&str> {
        match &self.rhs {
            Rhs::Label(l) => Some(l),
            Rhs::Expr(_) => None,
        }
    }

    /// No jet variable on the left: an algebraic identity rather than a PDE.
    pub fn is_algebraic(&self) -> bool {
        self.lhs.jet_variables().is_empty()
    }

    /// Jet variables of the left side ordered by degree descending, then
    /// lexicographically descending. The head is the default solve-for entry.
    pub fn free_jet_variables(&self) -> Vec<MultiIndex> {
        let mut vars: Vec<MultiIndex> = self.lhs.jet_variables().into_iter().collect();
        vars.sort_by(|a, b| b.degree().cmp(&a.degree()).then_with(|| b.cmp(a)));
        vars
    }

    /// `F(x, jet)` at a point. Missing jet entries are a fault.
    pub fn eval_operator(
        &self,
        x: &[f64],
        jet: &dyn Fn(&MultiIndex) -> Option<f64>,
    ) -> Result<f64, EvalFault> {
        if x.len() != self.dimension() {
            return Err(EvalFault::DimensionMismatch);
        }
        let env = PointEnv { x, jet, label: None };
        eval_scalar(&self.lhs, &env)
    }

    /// Equation rendered back into the grammar.
    pub fn pretty(&self) -> String {
        let rhs = match &self.rhs {
            Rhs::Label(l) => l.clone(),
            Rhs::Expr(e) => e.pretty(&self.coords),
        };
        format!("{} = {}", self.lhs.pretty(&self.coords), rhs)
    }
}

impl fmt::Display for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}

type LabelFn<'a> = &'a dyn Fn(&str) -> Option<f64>;

struct PointEnv<'a> {
    x: &'a [f64],
    jet: &'a dyn Fn(&MultiIndex) -> Option<f64>,
    label: Option<LabelFn<'a>>,
}

impl Env<f64> for PointEnv<'_> {
    fn constant(&self, c: f64) -> f64 {
        c
    }
    fn coord(&self, i: usize) -> Option<f64> {
        self.x.get(i).copied()
    }
    fn jet(&self, p: &MultiIndex) -> Option<f64> {
        (self.jet)(p)
    }
    fn label(&self, name: &str) -> Option<f64> {
        self.label.and_then(|l| l(name))
    }
}

/// A scalar field over the coordinates, written in the same grammar.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    expr: Expr,
    dimension: usize,
}

impl Field {
    /// Fails if the expression refers to `u` or to an unbound label.
    pub fn new(expr: Expr, dimension: usize) -> Result<Field, EvalFault> {
        if !expr.jet_variables().is_empty() || !expr.labels().is_empty() {
            return Err(EvalFault::NotAField);
        }
        Ok(Field { expr, dimension })
    }

    pub fn constant(c: f64, dimension: usize) -> Field {
        Field {
            expr: Expr::Const(c),
            dimension,
        }
    }

    /// Parse a field expression over the given coordinate names.
    pub fn parse(source: &str, coords: &[String]) -> Result<Field, ParseError> {
        let expr = parse_expr(source, coords)?;
        if !expr.jet_variables().is_empty() || !expr.labels().is_empty() {
            return Err(ParseError::Syntax {
                offset: 0,
                message: "field expression may only use coordinates and constants".into(),
            });
        }
        Ok(Field {
            expr,
            dimension: coords.len(),
        })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalFault> {
        let none = |_: &MultiIndex| None;
        let env = PointEnv {
            x,
            jet: &none,
            label: None,
        };
        eval_scalar(&self.expr, &env)
    }
}

#[cfg(test)]
mod tests;
