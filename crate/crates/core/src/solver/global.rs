//! Greedy row-major cover of a grid by local patches.

use super::local::{local_patch, local_patch_for, poly_defect, LocalPatch, PatchConfig, PatchError, Side};
use crate::expr::{Field, OperatorSpec};
use crate::fnspaces::{FnError, Grid, PiecewiseFn, SingularMask};
use crate::jets::JetPolynomial;
use crate::multi_index::MultiIndex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// A value constraint `u(point) = value`, snapped to the nearest grid node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub patch: PatchConfig,
    /// Distinct neighbouring patches tried as seeds before falling back.
    pub retry_budget: usize,
    /// Relative tolerance for post-hoc band and pin checks.
    pub audit_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            patch: PatchConfig::default(),
            retry_budget: 4,
            audit_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no patch could be built at {} node(s), first at node {}", .nodes.len(), .nodes[0])]
    CoverIncomplete { nodes: Vec<usize>, last: PatchError },
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Grid(#[from] FnError),
    #[error(transparent)]
    Envelope(#[from] crate::hausdorff::HError),
    #[error("levels must be at least 1, got {0}")]
    InvalidLevels(usize),
    #[error("pin has dimension {got}, grid has {want}")]
    PinDimension { got: usize, want: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalApprox {
    pub side: Side,
    pub epsilon: f64,
    pub function: PiecewiseFn,
    pub patches: Vec<LocalPatch>,
    /// Patch index owning each node.
    pub owner: Vec<usize>,
    /// Nodes masked because their owner's analytic defect left the band.
    pub demoted: Vec<usize>,
    pub warnings: Vec<String>,
    pub density_violation: Option<usize>,
}

impl GlobalApprox {
    pub fn gamma_fraction(&self) -> f64 {
        self.function.mask().fraction()
    }
}

/// Snap pins to nodes; later pins on the same node override earlier ones.
pub fn snap_pins(grid: &Grid, pins: &[Pin]) -> Result<BTreeMap<usize, f64>, SolveError> {
    let mut out = BTreeMap::new();
    for p in pins {
        if p.point.len() != grid.dim() {
            return Err(SolveError::PinDimension { got: p.point.len(), want: grid.dim() });
        }
        out.insert(grid.nearest_node(&p.point), p.value);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn global_approx(
    op: &OperatorSpec,
    f: &Field,
    eps: f64,
    grid: &Grid,
    side: Side,
    pins: &[Pin],
    prev: Option<&GlobalApprox>,
    cfg: &SolverConfig,
) -> Result<GlobalApprox, SolveError> {
    if op.dimension() != grid.dim() {
        return Err(FnError::DimensionMismatch { op: op.dimension(), grid: grid.dim() }.into());
    }
    let pinned = snap_pins(grid, pins)?;
    let mut patch_cfg = cfg.patch.clone();
    patch_cfg.min_radius = patch_cfg.min_radius.max(grid.max_spacing());
    let pin_ok = |poly: &JetPolynomial, node: usize| -> bool {
        match pinned.get(&node) {
            Some(&v) => (poly.eval(&grid.coords(node)) - v).abs() <= cfg.audit_tol * (1.0 + v.abs()),
            None => true,
        }
    };

    let n = grid.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut patches: Vec<LocalPatch> = Vec::new();
    let mut warnings = Vec::new();
    let mut failed = Vec::new();
    let mut last_err = PatchError::NoBracket;

    for node in 0..n {
        if owner[node].is_some() {
            continue;
        }
        let x0 = grid.coords(node);
        let mut seeds: Vec<Option<&JetPolynomial>> = nearby_owners(grid, &owner, node, cfg.retry_budget)
            .into_iter()
            .map(|p| Some(&patches[p].poly))
            .collect();
        if let Some(prev) = prev {
            seeds.push(Some(&prev.patches[prev.owner[node]].poly));
        }
        seeds.push(None);

        let pin = pinned.get(&node).copied();
        let mut built = None;
        match pin {
            None => {
                for seed in &seeds {
                    match local_patch(op, f, &x0, eps, side, *seed, &patch_cfg) {
                        Ok(p) => {
                            built = Some(p);
                            break;
                        }
                        Err(e) => last_err = e,
                    }
                }
            }
            Some(v) => {
                // Every seed/solve-for pairing is tried; the one breaking the
                // fewest pins inside its ball wins, earliest on ties.
                let mut best: Option<(usize, LocalPatch)> = None;
                'search: for seed in &seeds {
                    for head in op.free_jet_variables() {
                        let p = match pinned_patch(op, f, &x0, eps, side, *seed, &head, v, &patch_cfg) {
                            Ok(p) => p,
                            Err(e) => {
                                last_err = e;
                                continue;
                            }
                        };
                        let broken = ball_nodes(grid, node, p.radius)
                            .filter(|&j| owner[j].is_none() && !pin_ok(&p.poly, j))
                            .count();
                        if best.as_ref().is_none_or(|(b, _)| broken < *b) {
                            best = Some((broken, p));
                        }
                        if broken == 0 {
                            break 'search;
                        }
                    }
                }
                built = best.map(|(_, p)| p);
                if built.is_none() {
                    for seed in &seeds {
                        if let Ok(p) = local_patch(op, f, &x0, eps, side, *seed, &patch_cfg) {
                            warnings.push(format!("pin at node {node} rejected: no {side:?} patch honours value {v}"));
                            built = Some(p);
                            break;
                        }
                    }
                }
            }
        }
        let Some(patch) = built else {
            failed.push(node);
            continue;
        };

        let id = patches.len();
        owner[node] = Some(id);
        for j in ball_nodes(grid, node, patch.radius) {
            if owner[j].is_none() && pin_ok(&patch.poly, j) {
                owner[j] = Some(id);
            }
        }
        patches.push(patch);
    }
    if !failed.is_empty() {
        return Err(SolveError::CoverIncomplete { nodes: failed, last: last_err });
    }
    let owner: Vec<usize> = owner.into_iter().map(|o| o.expect("every node covered")).collect();

    // One side of each interface suffices to separate the patches; the
    // later patch gives up its boundary nodes.
    let mut mask = SingularMask::empty(grid);
    for (i, &o) in owner.iter().enumerate() {
        if grid.neighbors(i).iter().any(|&j| owner[j] < o) {
            mask.mark(i);
        }
    }
    let mut demoted = Vec::new();
    let mut values = Vec::with_capacity(n);
    for (i, &o) in owner.iter().enumerate() {
        let x = grid.coords(i);
        let p = &patches[o];
        values.push(p.poly.eval(&x));
        if mask.is_marked(i) {
            continue;
        }
        let tol = cfg.audit_tol * (1.0 + eps);
        let ok = matches!(poly_defect(op, f, &p.poly, &x), Ok(d) if side.contains(eps, d, tol));
        if !ok {
            mask.mark(i);
            demoted.push(i);
        }
    }
    let density_violation = mask.density_violation(grid);
    if let Some(i) = density_violation {
        warnings.push(format!("singular mask is dense around node {i}"));
    }
    let smoothness = op.order() + cfg.patch.extra_degree;
    let function = PiecewiseFn::new(grid.clone(), values, mask, smoothness)?;
    Ok(GlobalApprox {
        side,
        epsilon: eps,
        function,
        patches,
        owner,
        demoted,
        warnings,
        density_violation,
    })
}

#[allow(clippy::too_many_arguments)]
fn pinned_patch(
    op: &OperatorSpec,
    f: &Field,
    x0: &[f64],
    eps: f64,
    side: Side,
    seed: Option<&JetPolynomial>,
    head: &MultiIndex,
    value: f64,
    cfg: &PatchConfig,
) -> Result<LocalPatch, PatchError> {
    let mut s = match seed {
        Some(s) => s.recenter(x0),
        None => JetPolynomial::zero(x0.to_vec(), 0),
    };
    s.set(MultiIndex::zero(x0.len()), value);
    let p = local_patch_for(op, f, x0, eps, side, Some(&s), head, cfg)?;
    // an order-0 head is the value itself and overrides the pin
    if (p.poly.eval(x0) - value).abs() > 1e-9 * (1.0 + value.abs()) {
        return Err(PatchError::NoBracket);
    }
    Ok(p)
}

/// Nodes within Euclidean distance `radius` of `node`, in index order.
fn ball_nodes(grid: &Grid, node: usize, radius: f64) -> impl Iterator<Item = usize> + '_ {
    let x0 = grid.coords(node);
    let r: Vec<usize> = (0..grid.dim())
        .map(|a| (radius / grid.spacing(a)).floor() as usize)
        .collect();
    grid.box_around(node, &r).into_iter().filter(move |&j| {
        let d2: f64 = grid.coords(j).iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum();
        d2 <= radius * radius
    })
}

/// Owners of the covered nodes closest to `node` (Euclidean, ties to the
/// lower node index), distinct, at most `limit`.
fn nearby_owners(grid: &Grid, owner: &[Option<usize>], node: usize, limit: usize) -> Vec<usize> {
    let x = grid.coords(node);
    let max_r = grid.resolution().iter().copied().max().unwrap_or(1);
    for r in 1..max_r {
        let ring = grid.box_around(node, &vec![r; grid.dim()]);
        let mut hits: Vec<(f64, usize, usize)> = ring
            .into_iter()
            .filter_map(|j| {
                owner[j].map(|o| {
                    let d: f64 = grid.coords(j).iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d, j, o)
                })
            })
            .collect();
        if hits.is_empty() {
            continue;
        }
        hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut out = Vec::new();
        for (_, _, o) in hits {
            if !out.contains(&o) {
                out.push(o);
                if out.len() == limit {
                    break;
                }
            }
        }
        return out;
    }
    Vec::new()
}
