//! Refinement over `eps_k = eps0 / 2^k` and the two-sided cut.

use super::global::{global_approx, GlobalApprox, Pin, SolveError, SolverConfig};
use super::local::Side;
use crate::expr::{Field, OperatorSpec};
use crate::fnspaces::{apply_defect, FnError, Grid, PiecewiseFn};
use crate::hausdorff::{inf_family, sup_family, HError, IntervalFn};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutConfig {
    pub solver: SolverConfig,
    /// Multiplier in the stencil truncation allowance `factor * h^2 * scale`.
    pub allow_factor: f64,
    /// Scale in the allowance; defaults to `max(1, max |f|)` over the grid.
    pub truncation_scale: Option<f64>,
}

impl Default for CutConfig {
    fn default() -> Self {
        CutConfig {
            solver: SolverConfig::default(),
            allow_factor: 10.0,
            truncation_scale: None,
        }
    }
}

/// Finite-difference band audit of one grid function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectAudit {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub max_abs: Option<f64>,
    pub pass_fraction: f64,
    pub checked: usize,
    pub failed: Vec<usize>,
}

/// Audits `-eps - allow <= T_h u - f <= allow` (sub side) or the mirrored
/// band on every node the stencil can reach.
pub fn audit_defect(
    op: &OperatorSpec,
    f: &Field,
    u: &PiecewiseFn,
    eps: f64,
    side: Side,
    allowance: f64,
) -> Result<DefectAudit, FnError> {
    let (lo, hi) = side.band(eps);
    audit_band(op, f, u, lo, hi, allowance)
}

/// Audits `lo - allow <= T_h u - f <= hi + allow`.
pub fn audit_band(
    op: &OperatorSpec,
    f: &Field,
    u: &PiecewiseFn,
    lo: f64,
    hi: f64,
    allowance: f64,
) -> Result<DefectAudit, FnError> {
    let applied = apply_defect(op, f, u)?;
    let mut audit = DefectAudit {
        min: None,
        max: None,
        max_abs: None,
        pass_fraction: 0.0,
        checked: 0,
        failed: Vec::new(),
    };
    for i in 0..u.grid().len() {
        let Some(d) = applied.function.value(i) else { continue };
        audit.checked += 1;
        audit.min = Some(audit.min.map_or(d, |m: f64| m.min(d)));
        audit.max = Some(audit.max.map_or(d, |m: f64| m.max(d)));
        audit.max_abs = Some(audit.max_abs.map_or(d.abs(), |m: f64| m.max(d.abs())));
        if d < lo - allowance || d > hi + allowance {
            audit.failed.push(i);
        }
    }
    if audit.checked > 0 {
        audit.pass_fraction = (audit.checked - audit.failed.len()) as f64 / audit.checked as f64;
    }
    Ok(audit)
}

/// `factor * h_max^2 * scale`; zero for operators without derivatives, which
/// are evaluated without stencils.
pub fn truncation_allowance(op: &OperatorSpec, grid: &Grid, f: &Field, cfg: &CutConfig) -> f64 {
    if op.order() == 0 {
        return 0.0;
    }
    let scale = cfg.truncation_scale.unwrap_or_else(|| {
        (0..grid.len())
            .filter_map(|i| f.eval(&grid.coords(i)).ok())
            .fold(1.0, |m: f64, v| m.max(v.abs()))
    });
    let h = grid.max_spacing();
    cfg.allow_factor * h * h * scale
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutLevel {
    pub level: usize,
    pub approx: GlobalApprox,
    pub defect: DefectAudit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutSolution {
    pub epsilons: Vec<f64>,
    pub levels: Vec<CutLevel>,
    pub lower: IntervalFn,
    pub upper: IntervalFn,
    pub image_defect: f64,
    pub allowance: f64,
}

impl CutSolution {
    pub fn level(&self, k: usize, side: Side) -> Option<&CutLevel> {
        self.levels.iter().find(|l| l.level == k && l.approx.side == side)
    }

    pub fn finest(&self, side: Side) -> Option<&CutLevel> {
        self.levels.iter().rev().find(|l| l.approx.side == side)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let levels: Vec<_> = self
            .levels
            .iter()
            .map(|l| {
                serde_json::json!({
                    "level": l.level,
                    "side": l.approx.side,
                    "epsilon": l.approx.epsilon,
                    "fn": l.approx.function,
                    "gamma_fraction": l.approx.gamma_fraction(),
                    "patches": l.approx.patches.len(),
                    "defect": {
                        "min": l.defect.min,
                        "max": l.defect.max,
                        "pass_fraction": l.defect.pass_fraction,
                    },
                })
            })
            .collect();
        serde_json::json!({
            "epsilons": self.epsilons,
            "levels": levels,
            "lower": self.lower,
            "upper": self.upper,
            "image_defect": self.image_defect,
            "allowance": self.allowance,
        })
    }
}

/// A level that aborted, with whatever was completed before it.
#[derive(Debug, Clone, PartialEq)]
pub struct CutFailure {
    pub level: usize,
    pub side: Side,
    pub error: SolveError,
    pub partial: Option<Box<CutSolution>>,
}

impl std::fmt::Display for CutFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "level {} ({:?} side) failed: {}", self.level, self.side, self.error)
    }
}

impl std::error::Error for CutFailure {}

pub fn refine_cut(
    op: &OperatorSpec,
    f: &Field,
    grid: &Grid,
    eps0: f64,
    levels: usize,
    pins: &[Pin],
    cfg: &CutConfig,
) -> Result<CutSolution, CutFailure> {
    let fail = |level, side, error, partial| CutFailure { level, side, error, partial };
    if levels < 1 {
        return Err(fail(0, Side::Sub, SolveError::InvalidLevels(levels), None));
    }
    if !(eps0 > 0.0 && eps0.is_finite()) {
        let e = super::local::PatchError::InvalidEpsilon(eps0);
        return Err(fail(0, Side::Sub, e.into(), None));
    }
    let allowance = truncation_allowance(op, grid, f, cfg);
    let mut done: Vec<CutLevel> = Vec::new();
    let mut epsilons = Vec::new();
    for k in 0..=levels {
        let eps = eps0 / (1u64 << k) as f64;
        for side in [Side::Sub, Side::Super] {
            let prev = done.iter().rev().find(|l| l.approx.side == side).map(|l| &l.approx);
            let result = global_approx(op, f, eps, grid, side, pins, prev, &cfg.solver).and_then(|approx| {
                let defect = audit_defect(op, f, &approx.function, eps, side, allowance)?;
                Ok(CutLevel { level: k, approx, defect })
            });
            match result {
                Ok(l) => done.push(l),
                Err(e) => {
                    let partial = if k > 0 {
                        assemble(epsilons.clone(), done, allowance).ok().map(Box::new)
                    } else {
                        None
                    };
                    return Err(fail(k, side, e, partial));
                }
            }
        }
        epsilons.push(eps);
    }
    assemble(epsilons, done, allowance).map_err(|e| fail(levels, Side::Sub, SolveError::Envelope(e), None))
}

fn assemble(epsilons: Vec<f64>, levels: Vec<CutLevel>, allowance: f64) -> Result<CutSolution, HError> {
    let fns = |side| -> Vec<PiecewiseFn> {
        levels
            .iter()
            .filter(|l| l.approx.side == side && l.level < epsilons.len())
            .map(|l| l.approx.function.clone())
            .collect()
    };
    let lower = sup_family(&fns(Side::Sub))?;
    let upper = inf_family(&fns(Side::Super))?;
    let last = epsilons.len() - 1;
    let image_defect = levels
        .iter()
        .filter(|l| l.level == last)
        .filter_map(|l| l.defect.max_abs)
        .fold(0.0, f64::max);
    let levels = levels.into_iter().filter(|l| l.level <= last).collect();
    Ok(CutSolution {
        epsilons,
        levels,
        lower,
        upper,
        image_defect,
        allowance,
    })
}
