use super::{Exponent, Expr, Func};
use crate::multi_index::MultiIndex;
use std::fmt;

/// Evaluation faults are values: callers decide what a faulting point means.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalFault {
    DivisionByZero,
    LogOfNonPositive,
    NegativeBaseFractionalPower,
    NonFinite,
    MissingJet,
    MissingCoordinate,
    UnboundLabel,
    DimensionMismatch,
    NotAField,
}

impl fmt::Display for EvalFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EvalFault::DivisionByZero => "division by zero",
            EvalFault::LogOfNonPositive => "log of non-positive value",
            EvalFault::NegativeBaseFractionalPower => "fractional power of negative value",
            EvalFault::NonFinite => "non-finite value",
            EvalFault::MissingJet => "jet value not supplied",
            EvalFault::MissingCoordinate => "coordinate not supplied",
            EvalFault::UnboundLabel => "unbound right-hand label",
            EvalFault::DimensionMismatch => "point dimension does not match operator",
            EvalFault::NotAField => "expression depends on the unknown",
        };
        f.write_str(s)
    }
}

impl std::error::Error for EvalFault {}

/// Number-like values an expression can be evaluated over.
pub trait Scalar: Clone {
    fn value(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn div(&self, o: &Self) -> Result<Self, EvalFault>;
    fn pow(&self, e: Exponent) -> Result<Self, EvalFault>;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn log(&self) -> Result<Self, EvalFault>;
    fn abs(&self) -> Self;
}

/// Supplies leaves during evaluation.
pub trait Env<S> {
    fn constant(&self, c: f64) -> S;
    fn coord(&self, i: usize) -> Option<S>;
    fn jet(&self, p: &MultiIndex) -> Option<S>;
    fn label(&self, name: &str) -> Option<S>;
}

/// Structural recursion over the tree; pure.
pub fn eval_scalar<S: Scalar, E: Env<S> + ?Sized>(expr: &Expr, env: &E) -> Result<S, EvalFault> {
    let out = match expr {
        Expr::Const(c) => env.constant(*c),
        Expr::Coord(i) => env.coord(*i).ok_or(EvalFault::MissingCoordinate)?,
        Expr::Jet(p) => env.jet(p).ok_or(EvalFault::MissingJet)?,
        Expr::Label(l) => env.label(l).ok_or(EvalFault::UnboundLabel)?,
        Expr::Neg(a) => eval_scalar(a, env)?.neg(),
        Expr::Add(a, b) => eval_scalar(a, env)?.add(&eval_scalar(b, env)?),
        Expr::Sub(a, b) => eval_scalar(a, env)?.sub(&eval_scalar(b, env)?),
        Expr::Mul(a, b) => eval_scalar(a, env)?.mul(&eval_scalar(b, env)?),
        Expr::Div(a, b) => eval_scalar(a, env)?.div(&eval_scalar(b, env)?)?,
        Expr::Pow(a, e) => eval_scalar(a, env)?.pow(*e)?,
        Expr::Call(func, args) => {
            let a = eval_scalar(&args[0], env)?;
            match func {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Log => a.log()?,
                Func::Abs => a.abs(),
                Func::Min | Func::Max => {
                    let b = eval_scalar(&args[1], env)?;
                    // ties pick the first argument
                    let pick_a = match func {
                        Func::Min => a.value() <= b.value(),
                        _ => a.value() >= b.value(),
                    };
                    if pick_a {
                        a
                    } else {
                        b
                    }
                }
            }
        }
    };
    if out.value().is_finite() {
        Ok(out)
    } else {
        Err(EvalFault::NonFinite)
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn div(&self, o: &Self) -> Result<Self, EvalFault> {
        if *o == 0.0 {
            Err(EvalFault::DivisionByZero)
        } else {
            Ok(self / o)
        }
    }
    fn pow(&self, e: Exponent) -> Result<Self, EvalFault> {
        if e.is_integer() {
            if e.num < 0 && *self == 0.0 {
                return Err(EvalFault::DivisionByZero);
            }
            Ok(self.powi(e.num as i32))
        } else if *self < 0.0 {
            Err(EvalFault::NegativeBaseFractionalPower)
        } else if *self == 0.0 && e.num < 0 {
            Err(EvalFault::DivisionByZero)
        } else {
            Ok(self.powf(e.value()))
        }
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn log(&self) -> Result<Self, EvalFault> {
        if *self <= 0.0 {
            Err(EvalFault::LogOfNonPositive)
        } else {
            Ok(self.ln())
        }
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
}
