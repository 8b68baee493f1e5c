//! Multi-indices over `n` coordinates.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Derivative orders per coordinate. Ordering is lexicographic on the entries.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        assert!(!entries.is_empty(), "multi-index needs at least one coordinate");
        MultiIndex(entries)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex::new(vec![0; n])
    }

    /// Unit index `e_axis`.
    pub fn unit(n: usize, axis: usize) -> Self {
        let mut e = vec![0; n];
        e[axis] = 1;
        MultiIndex::new(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `p! = p_1! ... p_n!`
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&k| factorial(k)).product()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self - other` when every entry stays non-negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// `x^p = prod x_i^{p_i}`
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&k, &xi)| xi.powi(k as i32))
            .product()
    }

    /// All indices of dimension `n` with degree at most `max_degree`, ordered
    /// by degree ascending and lexicographically within a degree.
    pub fn enumerate(n: usize, max_degree: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for d in 0..=max_degree {
            let mut level = Vec::new();
            let mut cur = vec![0u32; n];
            compositions(d, 0, &mut cur, &mut level);
            level.sort();
            out.extend(level);
        }
        out
    }
}

fn compositions(rest: u32, axis: usize, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if axis + 1 == cur.len() {
        cur[axis] = rest;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for k in 0..=rest {
        cur[axis] = k;
        compositions(rest - k, axis + 1, cur, out);
    }
    cur[axis] = 0;
}

pub(crate) fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn enumeration_counts_match_binomials() {
        for n in 1..4 {
            for m in 0..6 {
                let all = MultiIndex::enumerate(n, m);
                assert_eq!(all.len() as u64, binomial(n as u64 + m as u64, m as u64));
            }
        }
    }

    #[test]
    fn enumeration_order_is_degree_then_lex() {
        let all = MultiIndex::enumerate(2, 2);
        let got: Vec<Vec<u32>> = all.iter().map(|p| p.entries().to_vec()).collect();
        assert_eq!(
            got,
            vec![
                vec![0, 0],
                vec![0, 1],
                vec![1, 0],
                vec![0, 2],
                vec![1, 1],
                vec![2, 0]
            ]
        );
    }

    #[test]
    fn sub_and_factorial() {
        let p = MultiIndex::new(vec![3, 1]);
        let q = MultiIndex::new(vec![1, 1]);
        assert_eq!(p.checked_sub(&q), Some(MultiIndex::new(vec![2, 0])));
        assert_eq!(q.checked_sub(&p), None);
        assert_eq!(p.factorial(), 6.0);
    }
}
