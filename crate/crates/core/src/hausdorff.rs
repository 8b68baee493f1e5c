//! Interval-valued grid functions: the discrete counterpart of Hausdorff
//! continuous functions.
//!
//! On a grid there is no limit process, so continuity is judged from the
//! data. An edge between neighbouring nodes is a *jump* when the gap between
//! their intervals exceeds `JUMP_RATIO` times the median gap of the nearby
//! edges on the same grid line (plus a small absolute floor). Graph
//! completion widens one endpoint node of every jump edge to the hull of both
//! intervals: the node with more jump edges, ties going to the larger index.
//! Completion repeats this until no jump edge is left, so it is idempotent by
//! construction. Samples of a continuous function have no jumps and are left
//! unchanged, a step gets the interval `[left, right]` at its upper node, and
//! an isolated spike is widened at the spike itself.

use crate::fnspaces::{FnError, Grid, PiecewiseFn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const JUMP_RATIO: f64 = 4.0;
const JUMP_FLOOR: f64 = 1e-9;
const WINDOW: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HError {
    #[error("empty family")]
    EmptyFamily,
    #[error(transparent)]
    Grid(#[from] FnError),
    #[error("cell count {got} does not match grid size {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("invalid interval at node {0}")]
    InvalidInterval(usize),
}

/// Closed interval with possibly infinite endpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    /// `None` unless `lo <= hi`, `lo < inf`, `hi > -inf` and neither is NaN.
    pub fn new(lo: f64, hi: f64) -> Option<Interval> {
        (lo <= hi && lo < f64::INFINITY && hi > f64::NEG_INFINITY).then_some(Interval { lo, hi })
    }

    pub fn point(v: f64) -> Interval {
        Interval::new(v, v).expect("finite point")
    }

    pub fn whole() -> Interval {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn hull(&self, o: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(o.lo),
            hi: self.hi.max(o.hi),
        }
    }

    /// Distance between the sets, zero when they meet.
    pub fn gap(&self, o: &Interval) -> f64 {
        (self.lo - o.hi).max(o.lo - self.hi).max(0.0)
    }
}

/// One interval per grid node; total (no mask).
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalFn {
    grid: Grid,
    cells: Vec<Interval>,
}

impl IntervalFn {
    pub fn new(grid: Grid, cells: Vec<Interval>) -> Result<Self, HError> {
        if cells.len() != grid.len() {
            return Err(HError::LengthMismatch {
                got: cells.len(),
                want: grid.len(),
            });
        }
        Ok(IntervalFn { grid, cells })
    }

    pub fn from_points(grid: &Grid, values: &[f64]) -> Result<Self, HError> {
        IntervalFn::new(grid.clone(), values.iter().map(|&v| Interval::point(v)).collect())
    }

    /// `C^0_nd -> H`: defined nodes become points, masked nodes the whole line.
    pub fn embed(u: &PiecewiseFn) -> IntervalFn {
        let cells = (0..u.grid().len())
            .map(|i| u.value(i).map_or(Interval::whole(), Interval::point))
            .collect();
        IntervalFn {
            grid: u.grid().clone(),
            cells,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cells(&self) -> &[Interval] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> Interval {
        self.cells[i]
    }

    pub fn degenerate_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_degenerate()).count()
    }
}

/// For every node, the hull it would receive from one completion pass, or
/// `None` when no jump edge is charged to it.
fn completion_pass(f: &IntervalFn) -> Vec<Option<Interval>> {
    let g = &f.grid;
    let n = g.dim();
    let scale = f
        .cells
        .iter()
        .flat_map(|c| [c.lo, c.hi])
        .filter(|v| v.is_finite())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = JUMP_FLOOR * (1.0 + scale);

    let mut jumps: Vec<(usize, usize)> = Vec::new();
    let mut stride = 1;
    for axis in (0..n).rev() {
        let res = g.resolution()[axis];
        for start in 0..g.len() {
            if g.multi(start)[axis] != 0 {
                continue;
            }
            let line: Vec<usize> = (0..res).map(|k| start + k * stride).collect();
            let gaps: Vec<f64> = line.windows(2).map(|w| f.cells[w[0]].gap(&f.cells[w[1]])).collect();
            for (e, &gap) in gaps.iter().enumerate() {
                if gap <= floor {
                    continue;
                }
                let mut window: Vec<f64> = (e.saturating_sub(WINDOW)..(e + WINDOW + 1).min(gaps.len()))
                    .filter(|&k| k != e)
                    .map(|k| gaps[k])
                    .collect();
                window.sort_by(|a, b| a.total_cmp(b));
                let median = match window.len() {
                    0 => 0.0,
                    l if l % 2 == 1 => window[l / 2],
                    l => 0.5 * (window[l / 2 - 1] + window[l / 2]),
                };
                if gap > JUMP_RATIO * median + floor {
                    jumps.push((line[e], line[e + 1]));
                }
            }
        }
        stride *= g.resolution()[axis];
    }

    let mut count = vec![0usize; g.len()];
    for &(a, b) in &jumps {
        count[a] += 1;
        count[b] += 1;
    }
    let mut widened: Vec<Option<Interval>> = vec![None; g.len()];
    for &(a, b) in &jumps {
        let (keep, grow) = if count[a] > count[b] { (b, a) } else { (a, b) };
        let base = widened[grow].unwrap_or(f.cells[grow]);
        widened[grow] = Some(base.hull(&f.cells[keep]));
    }
    widened
}

/// Hull-widening until no jump edge remains; returns the number of passes
/// that changed something.
pub fn graph_complete_counted(f: &IntervalFn) -> (IntervalFn, usize) {
    let mut cur = f.clone();
    let mut passes = 0;
    loop {
        let w = completion_pass(&cur);
        if w.iter().all(Option::is_none) {
            return (cur, passes);
        }
        passes += 1;
        for (c, nw) in cur.cells.iter_mut().zip(w) {
            if let Some(i) = nw {
                *c = i;
            }
        }
    }
}

pub fn graph_complete(f: &IntervalFn) -> IntervalFn {
    graph_complete_counted(f).0
}

/// Lower endpoints of the completion, upper endpoints untouched.
pub fn lower_envelope(f: &IntervalFn) -> IntervalFn {
    let full = graph_complete(f);
    let cells = f
        .cells
        .iter()
        .zip(&full.cells)
        .map(|(c, g)| Interval { lo: g.lo, hi: c.hi })
        .collect();
    IntervalFn {
        grid: f.grid.clone(),
        cells,
    }
}

/// Upper endpoints of the completion, lower endpoints untouched.
pub fn upper_envelope(f: &IntervalFn) -> IntervalFn {
    let full = graph_complete(f);
    let cells = f
        .cells
        .iter()
        .zip(&full.cells)
        .map(|(c, g)| Interval { lo: c.lo, hi: g.hi })
        .collect();
    IntervalFn {
        grid: f.grid.clone(),
        cells,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HCheck {
    pub ok: bool,
    /// First violating node.
    pub witness: Option<usize>,
}

/// Degenerate nodes are dense (distance 2) and `f` is its own completion.
pub fn is_hcontinuous(f: &IntervalFn) -> HCheck {
    let g = &f.grid;
    if let Some(i) = (0..g.len()).find(|&i| !g.ball(i, 2).iter().any(|&j| f.cells[j].is_degenerate())) {
        return HCheck {
            ok: false,
            witness: Some(i),
        };
    }
    let full = graph_complete(f);
    match (0..g.len()).find(|&i| full.cells[i] != f.cells[i]) {
        Some(i) => HCheck {
            ok: false,
            witness: Some(i),
        },
        None => HCheck { ok: true, witness: None },
    }
}

fn check_family(fs: &[PiecewiseFn]) -> Result<&Grid, HError> {
    let first = fs.first().ok_or(HError::EmptyFamily)?;
    if fs.iter().any(|u| u.grid() != first.grid()) {
        return Err(FnError::GridMismatch.into());
    }
    Ok(first.grid())
}

fn pointwise(fs: &[PiecewiseFn], pick: fn(f64, f64) -> f64) -> Result<IntervalFn, HError> {
    let grid = check_family(fs)?;
    let cells = (0..grid.len())
        .map(|i| {
            fs.iter()
                .filter_map(|u| u.value(i))
                .reduce(pick)
                .map_or(Interval::whole(), Interval::point)
        })
        .collect();
    Ok(IntervalFn {
        grid: grid.clone(),
        cells,
    })
}

/// Nodewise supremum before completion.
pub fn pointwise_sup(fs: &[PiecewiseFn]) -> Result<IntervalFn, HError> {
    pointwise(fs, f64::max)
}

/// Nodewise infimum before completion.
pub fn pointwise_inf(fs: &[PiecewiseFn]) -> Result<IntervalFn, HError> {
    pointwise(fs, f64::min)
}

/// Replaces unbounded cells by the hull of the bounded cells in the nearest
/// non-empty lattice shell (distance 1, then 2). Cells with no bounded cell
/// within distance 2 stay unbounded.
pub fn fill_from_neighbors(f: &IntervalFn) -> IntervalFn {
    let bounded = |c: &Interval| c.lo.is_finite() && c.hi.is_finite();
    let cells = (0..f.grid.len())
        .map(|i| {
            let c = f.cells[i];
            if bounded(&c) {
                return c;
            }
            for d in 1..=2 {
                let hull = f
                    .grid
                    .ball(i, d)
                    .into_iter()
                    .map(|j| f.cells[j])
                    .filter(bounded)
                    .reduce(|a, b| a.hull(&b));
                if let Some(h) = hull {
                    return h;
                }
            }
            c
        })
        .collect();
    IntervalFn {
        grid: f.grid.clone(),
        cells,
    }
}

/// Completed supremum of a family. Nodes masked in every member take their
/// values from the surrounding defined nodes before completion.
pub fn sup_family(fs: &[PiecewiseFn]) -> Result<IntervalFn, HError> {
    Ok(graph_complete(&fill_from_neighbors(&pointwise_sup(fs)?)))
}

pub fn inf_family(fs: &[PiecewiseFn]) -> Result<IntervalFn, HError> {
    Ok(graph_complete(&fill_from_neighbors(&pointwise_inf(fs)?)))
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Endpoint {
    Num(f64),
    Sentinel(String),
}

impl Endpoint {
    fn from_f64(v: f64) -> Endpoint {
        if v == f64::INFINITY {
            Endpoint::Sentinel("inf".into())
        } else if v == f64::NEG_INFINITY {
            Endpoint::Sentinel("-inf".into())
        } else {
            Endpoint::Num(v)
        }
    }

    fn to_f64(&self) -> Option<f64> {
        match self {
            Endpoint::Num(v) => Some(*v),
            Endpoint::Sentinel(s) if s == "inf" => Some(f64::INFINITY),
            Endpoint::Sentinel(s) if s == "-inf" => Some(f64::NEG_INFINITY),
            Endpoint::Sentinel(_) => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CellRepr {
    lo: Endpoint,
    hi: Endpoint,
}

#[derive(Serialize, Deserialize)]
struct IntervalFnRepr {
    #[serde(flatten)]
    grid: Grid,
    cells: Vec<CellRepr>,
}

impl Serialize for IntervalFn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        IntervalFnRepr {
            grid: self.grid.clone(),
            cells: self
                .cells
                .iter()
                .map(|c| CellRepr {
                    lo: Endpoint::from_f64(c.lo),
                    hi: Endpoint::from_f64(c.hi),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntervalFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = IntervalFnRepr::deserialize(d)?;
        let cells = r
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.lo.to_f64()
                    .zip(c.hi.to_f64())
                    .and_then(|(lo, hi)| Interval::new(lo, hi))
                    .ok_or_else(|| D::Error::custom(HError::InvalidInterval(i)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        IntervalFn::new(r.grid, cells).map_err(D::Error::custom)
    }
}
