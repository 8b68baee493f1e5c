//! Truncated multivariate power series.
//!
//! Evaluating an expression over [`Series`] propagates the Taylor expansion
//! of every subexpression around a base point, which lets the solver read
//! off the expansion of the defect `T P - f` without differentiating `F`
//! symbolically.

use super::{EvalFault, Exponent, Scalar};
use crate::multi_index::{factorial, MultiIndex};
use std::collections::HashMap;
use std::sync::Arc;

/// Monomial basis shared by all series of one dimension and degree.
#[derive(Debug)]
pub struct SeriesLayout {
    n: usize,
    degree: u32,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    // (i, j, k): basis[i] * basis[j] = basis[k]
    products: Vec<(usize, usize, usize)>,
}

impl SeriesLayout {
    pub fn new(n: usize, degree: u32) -> Arc<SeriesLayout> {
        let indices = MultiIndex::enumerate(n, degree);
        let lookup: HashMap<_, _> = indices.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let mut products = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if a.degree() + b.degree() <= degree {
                    products.push((i, j, lookup[&a.add(b)]));
                }
            }
        }
        Arc::new(SeriesLayout {
            n,
            degree,
            indices,
            lookup,
            products,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, p: &MultiIndex) -> Option<usize> {
        self.lookup.get(p).copied()
    }
}

/// `sum_r c_r s^r` truncated at the layout degree.
#[derive(Clone, Debug)]
pub struct Series {
    layout: Arc<SeriesLayout>,
    coeffs: Vec<f64>,
}

impl Series {
    pub fn constant(layout: &Arc<SeriesLayout>, c: f64) -> Series {
        let mut coeffs = vec![0.0; layout.indices.len()];
        coeffs[0] = c;
        Series {
            layout: layout.clone(),
            coeffs,
        }
    }

    /// `base + s_axis`
    pub fn variable(layout: &Arc<SeriesLayout>, axis: usize, base: f64) -> Series {
        let mut s = Series::constant(layout, base);
        if layout.degree >= 1 {
            let k = layout.lookup[&MultiIndex::unit(layout.n, axis)];
            s.coeffs[k] = 1.0;
        }
        s
    }

    /// Build from monomial coefficients; indices outside the layout are dropped.
    pub fn from_fn(layout: &Arc<SeriesLayout>, f: impl Fn(&MultiIndex) -> f64) -> Series {
        Series {
            layout: layout.clone(),
            coeffs: layout.indices.iter().map(f).collect(),
        }
    }

    pub fn layout(&self) -> &Arc<SeriesLayout> {
        &self.layout
    }

    /// Monomial coefficient of `s^r`.
    pub fn coeff(&self, r: &MultiIndex) -> f64 {
        self.layout.position(r).map_or(0.0, |k| self.coeffs[k])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Series {
        Series {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|&c| f(c)).collect(),
        }
    }

    fn zip(&self, o: &Series, f: impl Fn(f64, f64) -> f64) -> Series {
        Series {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `g(self)` from the derivatives `g^(k)(self_0)`, `k = 0..=degree`.
    fn compose(&self, derivs: &[f64]) -> Series {
        let mut tail = self.clone();
        tail.coeffs[0] = 0.0;
        let d = self.layout.degree as usize;
        let mut acc = Series::constant(&self.layout, derivs[d] / factorial(d as u32));
        for k in (0..d).rev() {
            acc = acc.mul(&tail);
            acc.coeffs[0] += derivs[k] / factorial(k as u32);
        }
        acc
    }

    fn recip(&self) -> Result<Series, EvalFault> {
        let a = self.coeffs[0];
        if a == 0.0 {
            return Err(EvalFault::DivisionByZero);
        }
        let d = self.layout.degree;
        // d^k/dx^k x^-1 = (-1)^k k! x^-(k+1)
        let derivs: Vec<f64> = (0..=d)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * factorial(k) / a.powi(k as i32 + 1)
            })
            .collect();
        Ok(self.compose(&derivs))
    }

    fn powi_nonneg(&self, k: u64) -> Series {
        let mut out = Series::constant(&self.layout, 1.0);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                out = out.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        out
    }
}

impl Scalar for Series {
    fn value(&self) -> f64 {
        self.coeffs[0]
    }
    fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a + b)
    }
    fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a - b)
    }
    fn mul(&self, o: &Self) -> Self {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.layout.products {
            coeffs[k] += self.coeffs[i] * o.coeffs[j];
        }
        Series {
            layout: self.layout.clone(),
            coeffs,
        }
    }
    fn neg(&self) -> Self {
        self.map(|c| -c)
    }
    fn div(&self, o: &Self) -> Result<Self, EvalFault> {
        Ok(self.mul(&o.recip()?))
    }
    fn pow(&self, e: Exponent) -> Result<Self, EvalFault> {
        if e.is_integer() {
            let p = self.powi_nonneg(e.num.unsigned_abs());
            return if e.num < 0 { p.recip() } else { Ok(p) };
        }
        let a = self.coeffs[0];
        if a < 0.0 {
            return Err(EvalFault::NegativeBaseFractionalPower);
        }
        if a == 0.0 {
            // not expandable around zero
            return Err(EvalFault::NonFinite);
        }
        let r = e.value();
        let mut falling = 1.0;
        let derivs: Vec<f64> = (0..=self.layout.degree)
            .map(|k| {
                let v = falling * a.powf(r - k as f64);
                falling *= r - k as f64;
                v
            })
            .collect();
        Ok(self.compose(&derivs))
    }
    fn sin(&self) -> Self {
        let (s, c) = self.coeffs[0].sin_cos();
        let cycle = [s, c, -s, -c];
        let derivs: Vec<f64> = (0..=self.layout.degree as usize).map(|k| cycle[k % 4]).collect();
        self.compose(&derivs)
    }
    fn cos(&self) -> Self {
        let (s, c) = self.coeffs[0].sin_cos();
        let cycle = [c, -s, -c, s];
        let derivs: Vec<f64> = (0..=self.layout.degree as usize).map(|k| cycle[k % 4]).collect();
        self.compose(&derivs)
    }
    fn exp(&self) -> Self {
        let e = self.coeffs[0].exp();
        self.compose(&vec![e; self.layout.degree as usize + 1])
    }
    fn log(&self) -> Result<Self, EvalFault> {
        let a = self.coeffs[0];
        if a <= 0.0 {
            return Err(EvalFault::LogOfNonPositive);
        }
        // d^k/dx^k ln x = (-1)^(k-1) (k-1)! x^-k
        let derivs: Vec<f64> = (0..=self.layout.degree)
            .map(|k| {
                if k == 0 {
                    a.ln()
                } else {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign * factorial(k - 1) / a.powi(k as i32)
                }
            })
            .collect();
        Ok(self.compose(&derivs))
    }
    fn abs(&self) -> Self {
        // branch fixed by the base value
        if self.coeffs[0] < 0.0 {
            self.neg()
        } else {
            self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn exp_of_variable_matches_taylor() {
        let l = SeriesLayout::new(1, 6);
        let e = Series::variable(&l, 0, 0.3).exp();
        for k in 0..=6u32 {
            let want = 0.3f64.exp() / factorial(k);
            assert!(close(e.coeff(&MultiIndex::new(vec![k])), want));
        }
    }

    #[test]
    fn reciprocal_times_self_is_one() {
        let l = SeriesLayout::new(2, 4);
        let x = Series::variable(&l, 0, 1.5);
        let y = Series::variable(&l, 1, -0.5);
        let s = x.mul(&y).add(&x).sin().add(&Series::constant(&l, 3.0));
        let one = s.mul(&s.recip().unwrap());
        for (i, p) in l.indices().iter().enumerate() {
            let want = if i == 0 { 1.0 } else { 0.0 };
            assert!((one.coeff(p) - want).abs() < 1e-12, "{p}: {}", one.coeff(p));
        }
    }

    #[test]
    fn log_inverts_exp() {
        let l = SeriesLayout::new(2, 5);
        let x = Series::variable(&l, 0, 0.2).add(&Series::variable(&l, 1, 0.1).mul(&Series::variable(&l, 0, 0.0)));
        let back = x.exp().log().unwrap();
        for p in l.indices() {
            assert!((back.coeff(p) - x.coeff(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn fractional_power_squares_back() {
        let l = SeriesLayout::new(1, 5);
        let x = Series::variable(&l, 0, 2.0);
        let r = x.pow(Exponent::new(1, 2).unwrap()).unwrap();
        let sq = r.mul(&r);
        for p in l.indices() {
            assert!((sq.coeff(p) - x.coeff(p)).abs() < 1e-12);
        }
    }
}
