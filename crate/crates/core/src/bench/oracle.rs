//! Reference solutions for the benchmark cases.

use crate::expr::{EvalFault, Field};

#[derive(Clone, Debug, PartialEq)]
pub enum Oracle {
    /// `u*(x)` given by an expression in the case coordinates.
    ClosedForm { source: String, field: Field },
    /// Burgers Riemann data `left` / `right` jumping at `x = jump` on `t = 0`,
    /// traced along characteristics in `(t, x)`.
    Characteristics { left: f64, right: f64, jump: f64 },
}

impl Oracle {
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalFault> {
        match self {
            Oracle::ClosedForm { field, .. } => field.eval(x),
            Oracle::Characteristics { left, right, jump } => {
                let (t, y) = (x[0], x[1] - jump);
                Ok(if left > right {
                    // shock with the Rankine–Hugoniot speed
                    if y < 0.5 * (left + right) * t { *left } else { *right }
                } else if y <= left * t {
                    *left
                } else if y >= right * t {
                    *right
                } else {
                    // rarefaction fan
                    y / t
                })
            }
        }
    }

    /// Shock speed for Riemann data that forms a shock.
    pub fn shock_speed(&self) -> Option<f64> {
        match self {
            Oracle::Characteristics { left, right, .. } if left > right => Some(0.5 * (left + right)),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Oracle::ClosedForm { source, .. } => format!("closed_form:{source}"),
            Oracle::Characteristics { .. } => "characteristics".into(),
        }
    }
}
