//! Grid functions that are smooth off a closed nowhere-dense singular mask,
//! with the pointwise order and the order pulled back through an operator.

use crate::expr::{EvalFault, Field, OperatorSpec};
use crate::multi_index::MultiIndex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write;
use thiserror::Error;

pub const MAX_RESOLUTION: usize = 1025;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FnError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("functions live on different grids")]
    GridMismatch,
    #[error("value vector has {got} entries, grid has {want} nodes")]
    LengthMismatch { got: usize, want: usize },
    #[error("function is C^{have} off its mask but the operator has order {need}")]
    SmoothnessTooLow { have: u32, need: u32 },
    #[error("stencil radius {radius} does not fit axis {axis} with {res} nodes")]
    StencilTooWide { axis: usize, radius: usize, res: usize },
    #[error("no central stencil for derivative order {0}")]
    UnsupportedDerivativeOrder(u32),
    #[error("operator dimension {op} does not match grid dimension {grid}")]
    DimensionMismatch { op: usize, grid: usize },
    #[error("mask is not nowhere dense: node {0} has no unmarked node within distance 2")]
    DenseMask(usize),
}

/// Axis-aligned box sampled at `resolution[i]` nodes per axis, row-major with
/// axis 0 varying slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    resolution: Vec<usize>,
}

#[derive(Clone, Serialize, Deserialize)]
struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct GridRepr {
    bounds: Bounds,
    resolution: Vec<usize>,
}

impl TryFrom<GridRepr> for Grid {
    type Error = FnError;
    fn try_from(r: GridRepr) -> Result<Self, FnError> {
        Grid::new(r.bounds.lo, r.bounds.hi, r.resolution)
    }
}

impl From<Grid> for GridRepr {
    fn from(g: Grid) -> Self {
        GridRepr {
            bounds: Bounds { lo: g.lo, hi: g.hi },
            resolution: g.resolution,
        }
    }
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, resolution: Vec<usize>) -> Result<Grid, FnError> {
        if lo.is_empty() || lo.len() != hi.len() || lo.len() != resolution.len() {
            return Err(FnError::InvalidGrid("bounds and resolution must have equal non-zero length".into()));
        }
        for i in 0..lo.len() {
            if !(lo[i].is_finite() && hi[i].is_finite() && hi[i] > lo[i]) {
                return Err(FnError::InvalidGrid(format!("axis {i}: need finite lo < hi")));
            }
            if resolution[i] < 3 || resolution[i] > MAX_RESOLUTION {
                return Err(FnError::InvalidGrid(format!(
                    "axis {i}: resolution {} outside 3..={MAX_RESOLUTION}",
                    resolution[i]
                )));
            }
        }
        Ok(Grid { lo, hi, resolution })
    }

    /// Same resolution on every axis.
    pub fn uniform(lo: Vec<f64>, hi: Vec<f64>, res: usize) -> Result<Grid, FnError> {
        let n = lo.len();
        Grid::new(lo, hi, vec![res; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.resolution[axis] - 1) as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).fold(0.0, f64::max)
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).fold(f64::INFINITY, f64::min)
    }

    pub fn multi(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            out[axis] = idx % self.resolution[axis];
            idx /= self.resolution[axis];
        }
        out
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.resolution)
            .fold(0, |acc, (&m, &r)| acc * r + m)
    }

    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        if k + 1 == self.resolution[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + k as f64 * self.spacing(axis)
        }
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi(idx)
            .into_iter()
            .enumerate()
            .map(|(axis, k)| self.coord(axis, k))
            .collect()
    }

    /// Lattice neighbours at graph distance one.
    pub fn neighbors(&self, idx: usize) -> Vec<usize> {
        let m = self.multi(idx);
        let mut out = Vec::with_capacity(2 * self.dim());
        let mut stride = 1;
        for axis in (0..self.dim()).rev() {
            if m[axis] > 0 {
                out.push(idx - stride);
            }
            if m[axis] + 1 < self.resolution[axis] {
                out.push(idx + stride);
            }
            stride *= self.resolution[axis];
        }
        out.sort_unstable();
        out
    }

    /// Nodes within graph distance `d` (including `idx`).
    pub fn ball(&self, idx: usize, d: usize) -> Vec<usize> {
        let m = self.multi(idx);
        let mut out = Vec::new();
        let mut cur = vec![0usize; self.dim()];
        self.ball_rec(&m, d, 0, &mut cur, &mut out);
        out
    }

    fn ball_rec(&self, m: &[usize], budget: usize, axis: usize, cur: &mut Vec<usize>, out: &mut Vec<usize>) {
        if axis == self.dim() {
            out.push(self.index(cur));
            return;
        }
        let lo = m[axis].saturating_sub(budget);
        let hi = (m[axis] + budget).min(self.resolution[axis] - 1);
        for k in lo..=hi {
            cur[axis] = k;
            let used = k.abs_diff(m[axis]);
            self.ball_rec(m, budget - used, axis + 1, cur, out);
        }
    }

    /// Nodes whose index differs from `idx` by at most `radius[i]` on each axis.
    pub fn box_around(&self, idx: usize, radius: &[usize]) -> Vec<usize> {
        let m = self.multi(idx);
        let ranges: Vec<(usize, usize)> = (0..self.dim())
            .map(|a| (m[a].saturating_sub(radius[a]), (m[a] + radius[a]).min(self.resolution[a] - 1)))
            .collect();
        let mut out = Vec::new();
        let mut cur: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            out.push(self.index(&cur));
            let mut axis = self.dim();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if cur[axis] < ranges[axis].1 {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = ranges[axis].0;
            }
        }
    }

    /// Doubles the number of intervals per axis; old nodes stay nodes.
    pub fn refined(&self) -> Result<Grid, FnError> {
        Grid::new(
            self.lo.clone(),
            self.hi.clone(),
            self.resolution.iter().map(|r| 2 * (r - 1) + 1).collect(),
        )
    }

    /// Nearest node to a point (clamped to the box).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let m: Vec<usize> = (0..self.dim())
            .map(|a| {
                let k = ((x[a] - self.lo[a]) / self.spacing(a)).round();
                k.clamp(0.0, (self.resolution[a] - 1) as f64) as usize
            })
            .collect();
        self.index(&m)
    }
}

/// Discrete singular set: a node set that must be nowhere dense in the
/// distance-2 sense.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SingularMask {
    marked: Vec<bool>,
}

impl SingularMask {
    pub fn empty(grid: &Grid) -> Self {
        SingularMask {
            marked: vec![false; grid.len()],
        }
    }

    pub fn from_indices(grid: &Grid, nodes: impl IntoIterator<Item = usize>) -> Self {
        let mut m = SingularMask::empty(grid);
        for i in nodes {
            m.marked[i] = true;
        }
        m
    }

    pub fn len(&self) -> usize {
        self.marked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marked.is_empty()
    }

    pub fn is_marked(&self, i: usize) -> bool {
        self.marked[i]
    }

    pub fn mark(&mut self, i: usize) {
        self.marked[i] = true;
    }

    pub fn count(&self) -> usize {
        self.marked.iter().filter(|&&m| m).count()
    }

    /// `|marked| / |grid|`, the measure proxy.
    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.marked.len() as f64
    }

    pub fn indices(&self) -> Vec<usize> {
        self.marked.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
    }

    pub fn union(&self, other: &SingularMask) -> SingularMask {
        SingularMask {
            marked: self.marked.iter().zip(&other.marked).map(|(a, b)| *a || *b).collect(),
        }
    }

    /// Box dilation by per-axis radii.
    pub fn dilate(&self, grid: &Grid, radius: &[usize]) -> SingularMask {
        let mut out = self.clone();
        for i in self.indices() {
            for j in grid.box_around(i, radius) {
                out.marked[j] = true;
            }
        }
        out
    }

    /// First node with no unmarked node within graph distance 2, if any.
    pub fn density_violation(&self, grid: &Grid) -> Option<usize> {
        (0..self.marked.len()).find(|&i| self.marked[i] && grid.ball(i, 2).iter().all(|&j| self.marked[j]))
    }

    pub fn check_nowhere_dense(&self, grid: &Grid) -> Result<(), FnError> {
        match self.density_violation(grid) {
            Some(i) => Err(FnError::DenseMask(i)),
            None => Ok(()),
        }
    }
}

/// Element of the discrete `C^l_nd`: values on unmarked nodes only.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseFn {
    grid: Grid,
    values: Vec<f64>,
    mask: SingularMask,
    smoothness: u32,
}

impl PiecewiseFn {
    /// Values at marked nodes are discarded.
    pub fn new(grid: Grid, values: Vec<f64>, mask: SingularMask, smoothness: u32) -> Result<Self, FnError> {
        if values.len() != grid.len() {
            return Err(FnError::LengthMismatch {
                got: values.len(),
                want: grid.len(),
            });
        }
        if mask.len() != grid.len() {
            return Err(FnError::LengthMismatch {
                got: mask.len(),
                want: grid.len(),
            });
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| if mask.is_marked(i) { f64::NAN } else { v })
            .collect();
        Ok(PiecewiseFn {
            grid,
            values,
            mask,
            smoothness,
        })
    }

    /// Samples a function everywhere with an empty mask.
    pub fn sample(grid: &Grid, smoothness: u32, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        PiecewiseFn {
            grid: grid.clone(),
            values,
            mask: SingularMask::empty(grid),
            smoothness,
        }
    }

    pub fn with_mask(mut self, mask: SingularMask) -> Self {
        for i in mask.indices() {
            self.values[i] = f64::NAN;
        }
        self.mask = self.mask.union(&mask);
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &SingularMask {
        &self.mask
    }

    pub fn smoothness(&self) -> u32 {
        self.smoothness
    }

    pub fn value(&self, i: usize) -> Option<f64> {
        (!self.mask.is_marked(i)).then(|| self.values[i])
    }

    /// Raw values, NaN on marked nodes.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_csv(&self, coord_names: &[String]) -> String {
        let mut s = String::new();
        for name in coord_names {
            let _ = write!(s, "{name},");
        }
        s.push_str("value,masked\n");
        for i in 0..self.grid.len() {
            for c in self.grid.coords(i) {
                let _ = write!(s, "{c},");
            }
            match self.value(i) {
                Some(v) => {
                    let _ = writeln!(s, "{v},0");
                }
                None => s.push_str("NaN,1\n"),
            }
        }
        s
    }
}

#[derive(Serialize, Deserialize)]
struct PiecewiseRepr {
    bounds: Bounds,
    resolution: Vec<usize>,
    #[serde(default)]
    smoothness: u32,
    values: Vec<Option<f64>>,
    mask: Vec<usize>,
}

impl Serialize for PiecewiseFn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PiecewiseRepr {
            bounds: Bounds {
                lo: self.grid.lo.clone(),
                hi: self.grid.hi.clone(),
            },
            resolution: self.grid.resolution.clone(),
            smoothness: self.smoothness,
            values: (0..self.grid.len()).map(|i| self.value(i)).collect(),
            mask: self.mask.indices(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PiecewiseFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = PiecewiseRepr::deserialize(d)?;
        let grid = Grid::new(r.bounds.lo, r.bounds.hi, r.resolution).map_err(D::Error::custom)?;
        if let Some(&bad) = r.mask.iter().find(|&&i| i >= grid.len()) {
            return Err(D::Error::custom(format!("mask index {bad} out of range")));
        }
        let mut mask = SingularMask::from_indices(&grid, r.mask);
        if r.values.len() != grid.len() {
            return Err(D::Error::custom("values length does not match grid"));
        }
        for (i, v) in r.values.iter().enumerate() {
            if v.is_none() {
                mask.mark(i);
            }
        }
        let values = r.values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        PiecewiseFn::new(grid, values, mask, r.smoothness).map_err(D::Error::custom)
    }
}

/// `u <= v` at every node where both are defined.
pub fn natural_leq(u: &PiecewiseFn, v: &PiecewiseFn) -> Result<bool, FnError> {
    if u.grid != v.grid {
        return Err(FnError::GridMismatch);
    }
    Ok((0..u.grid.len()).all(|i| match (u.value(i), v.value(i)) {
        (Some(a), Some(b)) => a <= b,
        _ => true,
    }))
}

/// Weights of the second-order central stencil for `d^k/dx^k` (unit spacing),
/// offsets `-r..=r`.
fn central_weights(k: u32) -> Result<&'static [f64], FnError> {
    Ok(match k {
        0 => &[1.0],
        1 => &[-0.5, 0.0, 0.5],
        2 => &[1.0, -2.0, 1.0],
        3 => &[-0.5, 1.0, 0.0, -1.0, 0.5],
        4 => &[1.0, -4.0, 6.0, -4.0, 1.0],
        _ => return Err(FnError::UnsupportedDerivativeOrder(k)),
    })
}

/// Tensor-product stencil for one multi-index: (offsets, weight) pairs.
struct Stencil {
    terms: Vec<(Vec<isize>, f64)>,
}

impl Stencil {
    fn new(p: &MultiIndex, grid: &Grid) -> Result<Stencil, FnError> {
        let mut terms: Vec<(Vec<isize>, f64)> = vec![(Vec::new(), 1.0)];
        for (axis, &k) in p.entries().iter().enumerate() {
            let w = central_weights(k)?;
            let r = (w.len() / 2) as isize;
            let scale = grid.spacing(axis).powi(k as i32);
            let mut next = Vec::new();
            for (off, wt) in &terms {
                for (j, &wj) in w.iter().enumerate() {
                    if wj == 0.0 {
                        continue;
                    }
                    let mut o = off.clone();
                    o.push(j as isize - r);
                    next.push((o, wt * wj / scale));
                }
            }
            terms = next;
        }
        Ok(Stencil { terms })
    }
}

/// Per-axis stencil radius needed by an operator.
pub fn stencil_radius(op: &OperatorSpec) -> Result<Vec<usize>, FnError> {
    let mut r = vec![0usize; op.dimension()];
    for p in op.lhs().jet_variables() {
        for (axis, &k) in p.entries().iter().enumerate() {
            r[axis] = r[axis].max(central_weights(k)?.len() / 2);
        }
    }
    Ok(r)
}

/// Result of applying a discretised operator.
#[derive(Clone, Debug)]
pub struct Applied {
    pub function: PiecewiseFn,
    /// Nodes where `F` faulted; they are part of the result mask.
    pub faults: Vec<(usize, EvalFault)>,
}

/// `T(x, D) u` with central second-order stencils. Nodes whose stencil meets
/// the mask or leaves the grid join the result mask.
pub fn apply_operator(op: &OperatorSpec, u: &PiecewiseFn) -> Result<Applied, FnError> {
    apply_with(op, u, |_, v| Ok(v))
}

/// `T(x, D) u - f` on the same support as [`apply_operator`].
pub fn apply_defect(op: &OperatorSpec, f: &Field, u: &PiecewiseFn) -> Result<Applied, FnError> {
    apply_with(op, u, |x, v| Ok(v - f.eval(x)?))
}

fn apply_with(
    op: &OperatorSpec,
    u: &PiecewiseFn,
    post: impl Fn(&[f64], f64) -> Result<f64, EvalFault>,
) -> Result<Applied, FnError> {
    let grid = &u.grid;
    if op.dimension() != grid.dim() {
        return Err(FnError::DimensionMismatch {
            op: op.dimension(),
            grid: grid.dim(),
        });
    }
    if u.smoothness < op.order() {
        return Err(FnError::SmoothnessTooLow {
            have: u.smoothness,
            need: op.order(),
        });
    }
    let radius = stencil_radius(op)?;
    for (axis, &r) in radius.iter().enumerate() {
        if 2 * r + 1 > grid.resolution[axis] {
            return Err(FnError::StencilTooWide {
                axis,
                radius: r,
                res: grid.resolution[axis],
            });
        }
    }
    let stencils: Vec<(MultiIndex, Stencil)> = op
        .lhs()
        .jet_variables()
        .into_iter()
        .map(|p| Stencil::new(&p, grid).map(|s| (p, s)))
        .collect::<Result<_, _>>()?;

    let mut mask = u.mask.dilate(grid, &radius);
    for i in 0..grid.len() {
        let m = grid.multi(i);
        if m.iter().zip(&radius).zip(&grid.resolution).any(|((&k, &r), &res)| k < r || k + r >= res) {
            mask.mark(i);
        }
    }

    let mut values = vec![f64::NAN; grid.len()];
    let mut faults = Vec::new();
    for i in 0..grid.len() {
        if mask.is_marked(i) {
            continue;
        }
        let m = grid.multi(i);
        let mut jet = BTreeMap::new();
        for (p, st) in &stencils {
            let v: f64 = st
                .terms
                .iter()
                .map(|(off, w)| {
                    let nb: Vec<usize> = m.iter().zip(off).map(|(&k, &o)| (k as isize + o) as usize).collect();
                    w * u.values[grid.index(&nb)]
                })
                .sum();
            jet.insert(p.clone(), v);
        }
        let x = grid.coords(i);
        match op.eval_operator(&x, &|p| jet.get(p).copied()).and_then(|v| post(&x, v)) {
            Ok(v) => values[i] = v,
            Err(e) => {
                faults.push((i, e));
                mask.mark(i);
            }
        }
    }
    let function = PiecewiseFn::new(grid.clone(), values, mask, 0)?;
    Ok(Applied { function, faults })
}

/// `u <=_T v` iff `T u <= T v` pointwise where both are defined.
pub fn pullback_leq(op: &OperatorSpec, u: &PiecewiseFn, v: &PiecewiseFn) -> Result<bool, FnError> {
    if u.grid != v.grid {
        return Err(FnError::GridMismatch);
    }
    natural_leq(&apply_operator(op, u)?.function, &apply_operator(op, v)?.function)
}

#[cfg(test)]
mod tests;
