//! Local Taylor polynomials stored by their jet at the center.
//!
//! `P(x) = sum_p a_p (x - c)^p / p!`, so `D^p P(c) = a_p` exactly.

use crate::multi_index::MultiIndex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
pub struct JetPolynomial {
    center: Vec<f64>,
    order: u32,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl JetPolynomial {
    /// Zero polynomial of the given degree.
    pub fn zero(center: Vec<f64>, order: u32) -> Self {
        assert!(!center.is_empty());
        JetPolynomial {
            center,
            order,
            coeffs: BTreeMap::new(),
        }
    }

    /// Coefficients with `|p| > order` are rejected.
    pub fn from_coeffs(
        center: Vec<f64>,
        order: u32,
        coeffs: impl IntoIterator<Item = (MultiIndex, f64)>,
    ) -> Option<Self> {
        let mut p = JetPolynomial::zero(center, order);
        for (k, v) in coeffs {
            if k.dim() != p.dim() || k.degree() > order {
                return None;
            }
            p.set(k, v);
        }
        Some(p)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coeff(&self, p: &MultiIndex) -> f64 {
        self.coeffs.get(p).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, f64> {
        &self.coeffs
    }

    pub fn set(&mut self, p: MultiIndex, value: f64) {
        debug_assert!(p.degree() <= self.order);
        if value == 0.0 {
            self.coeffs.remove(&p);
        } else {
            self.coeffs.insert(p, value);
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.derivative_at(&MultiIndex::zero(self.dim()), x)
    }

    /// Closed-form `D^q P(x)`.
    pub fn derivative_at(&self, q: &MultiIndex, x: &[f64]) -> f64 {
        let dx: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        self.coeffs
            .iter()
            .filter_map(|(p, a)| p.checked_sub(q).map(|r| a * r.monomial(&dx) / r.factorial()))
            .sum()
    }

    /// All derivatives `|q| <= m` at `x`, in enumeration order.
    pub fn jet_of(&self, x: &[f64], m: u32) -> BTreeMap<MultiIndex, f64> {
        MultiIndex::enumerate(self.dim(), m)
            .into_iter()
            .map(|q| {
                let v = self.derivative_at(&q, x);
                (q, v)
            })
            .collect()
    }

    /// The same polynomial expanded about a new center.
    pub fn recenter(&self, center: &[f64]) -> JetPolynomial {
        let mut out = JetPolynomial::zero(center.to_vec(), self.order);
        for (q, v) in self.jet_of(center, self.order) {
            out.set(q, v);
        }
        out
    }

    /// `alpha * self + beta * other`; both must share center and dimension.
    pub fn combine(&self, alpha: f64, other: &JetPolynomial, beta: f64) -> JetPolynomial {
        assert_eq!(self.center, other.center);
        let mut out = JetPolynomial::zero(self.center.clone(), self.order.max(other.order));
        for p in self.coeffs.keys().chain(other.coeffs.keys()) {
            out.set(p.clone(), alpha * self.coeff(p) + beta * other.coeff(p));
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct CoeffEntry {
    p: Vec<u32>,
    a: f64,
}

#[derive(Serialize, Deserialize)]
struct JetRepr {
    center: Vec<f64>,
    order: u32,
    coeffs: Vec<CoeffEntry>,
}

impl Serialize for JetPolynomial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        JetRepr {
            center: self.center.clone(),
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .map(|(p, a)| CoeffEntry {
                    p: p.entries().to_vec(),
                    a: *a,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for JetPolynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = JetRepr::deserialize(d)?;
        if r.center.is_empty() {
            return Err(D::Error::custom("empty center"));
        }
        JetPolynomial::from_coeffs(
            r.center,
            r.order,
            r.coeffs.into_iter().map(|c| (MultiIndex::new(c.p), c.a)),
        )
        .ok_or_else(|| D::Error::custom("coefficient index exceeds order or dimension"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn constant_polynomial() {
        let p = JetPolynomial::from_coeffs(vec![0.0, 0.0], 2, [(mi(&[0, 0]), 4.95)]).unwrap();
        for x in [[0.0, 0.0], [3.0, -1.0]] {
            assert_eq!(p.eval(&x), 4.95);
        }
    }

    #[test]
    fn one_dimensional_eval_and_derivative() {
        let p = JetPolynomial::from_coeffs(vec![0.0], 2, [(mi(&[0]), 1.0), (mi(&[1]), 1.0), (mi(&[2]), 2.0)]).unwrap();
        assert_eq!(p.eval(&[0.5]), 1.75);
        let sq = JetPolynomial::from_coeffs(vec![0.0], 2, [(mi(&[2]), 2.0)]).unwrap();
        assert_eq!(sq.derivative_at(&mi(&[1]), &[3.0]), 6.0);
    }

    #[test]
    fn two_dimensional_examples() {
        let p = JetPolynomial::from_coeffs(vec![0.0, 0.0], 2, [(mi(&[2, 0]), 2.0)]).unwrap();
        assert_eq!(p.eval(&[1.0, 1.0]), 1.0);

        let r2 = JetPolynomial::from_coeffs(vec![0.0, 0.0], 2, [(mi(&[2, 0]), 2.0), (mi(&[0, 2]), 2.0)]).unwrap();
        for x in [[0.0, 0.0], [1.0, 0.0], [-2.0, 5.0]] {
            assert_eq!(r2.derivative_at(&mi(&[2, 0]), &x), 2.0);
            assert_eq!(r2.derivative_at(&mi(&[0, 2]), &x), 2.0);
        }
        let jet = r2.jet_of(&[1.0, 0.0], 2);
        assert_eq!(jet.len(), 6);
        let want = [
            (mi(&[0, 0]), 1.0),
            (mi(&[0, 1]), 0.0),
            (mi(&[1, 0]), 2.0),
            (mi(&[0, 2]), 2.0),
            (mi(&[1, 1]), 0.0),
            (mi(&[2, 0]), 2.0),
        ];
        for (p, v) in want {
            assert_eq!(jet[&p], v, "{p}");
        }
    }

    #[test]
    fn json_shape() {
        let p = JetPolynomial::from_coeffs(vec![0.5], 1, [(mi(&[1]), -2.0)]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"center":[0.5],"order":1,"coeffs":[{"p":[1],"a":-2.0}]}"#);
        let back: JetPolynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<JetPolynomial>(r#"{"center":[0.5],"order":1,"coeffs":[{"p":[2],"a":1.0}]}"#).is_err());
    }

    fn arb_poly(n: usize, order: u32) -> impl Strategy<Value = JetPolynomial> {
        let count = MultiIndex::enumerate(n, order).len();
        (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-10.0f64..10.0, count),
        )
            .prop_map(move |(c, a)| {
                JetPolynomial::from_coeffs(c, order, MultiIndex::enumerate(n, order).into_iter().zip(a)).unwrap()
            })
    }

    proptest! {
        #[test]
        fn taylor_identity_at_center(p in arb_poly(2, 4)) {
            let jet = p.jet_of(p.center(), p.order());
            for (q, v) in jet {
                prop_assert_eq!(v, p.coeff(&q));
            }
        }

        #[test]
        fn derivatives_match_central_differences(
            p in arb_poly(2, 3),
            x in prop::collection::vec(-1.0f64..1.0, 2),
            axis in 0usize..2,
        ) {
            let h = 1e-5;
            for q in MultiIndex::enumerate(2, 2) {
                let dq = q.add(&MultiIndex::unit(2, axis));
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[axis] += h;
                xm[axis] -= h;
                let fd = (p.derivative_at(&q, &xp) - p.derivative_at(&q, &xm)) / (2.0 * h);
                let exact = p.derivative_at(&dq, &x);
                let scale = 1.0 + exact.abs().max(p.derivative_at(&q, &x).abs());
                prop_assert!((fd - exact).abs() <= 1e-6 * scale, "{} {} {}", q, fd, exact);
            }
        }

        #[test]
        fn derivative_is_linear(p in arb_poly(2, 3), q in arb_poly(2, 3), a in -3.0f64..3.0, b in -3.0f64..3.0,
                                x in prop::collection::vec(-1.0f64..1.0, 2)) {
            let q = q.recenter(p.center());
            let combo = p.combine(a, &q, b);
            for k in MultiIndex::enumerate(2, 3) {
                let lhs = combo.derivative_at(&k, &x);
                let rhs = a * p.derivative_at(&k, &x) + b * q.derivative_at(&k, &x);
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
            }
        }

        #[test]
        fn recentering_preserves_values(p in arb_poly(2, 3), c in prop::collection::vec(-1.0f64..1.0, 2),
                                        x in prop::collection::vec(-1.0f64..1.0, 2)) {
            let r = p.recenter(&c);
            prop_assert!((r.eval(&x) - p.eval(&x)).abs() <= 1e-9 * (1.0 + p.eval(&x).abs()));
        }
    }
}
