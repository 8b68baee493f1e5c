//! Local polynomial sub- and super-solutions.
//!
//! A patch around `x0` is a polynomial `P` with `f - eps <= T P <= f` (sub
//! side) or `f <= T P <= f + eps` (super side) on a ball of radius `delta`.
//! Construction:
//!
//! 1. every jet coefficient except the solve-for entry comes from the seed;
//! 2. the solve-for entry is found by bisection so that `T P(x0)` hits the
//!    band midpoint;
//! 3. higher coefficients `a_{h+r}`, `1 <= |r| <= extra_degree`, are chosen so
//!    that the Taylor coefficients of the defect at `x0` vanish up to that
//!    degree, one degree at a time over truncated power series;
//! 4. `delta` is halved from the cap until the defect stays in the band on a
//!    fixed sample set.

use crate::expr::series::{Series, SeriesLayout};
use crate::expr::{eval_scalar, Env, EvalFault, Field, OperatorSpec, Scalar};
use crate::jets::JetPolynomial;
use crate::multi_index::MultiIndex;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

const BRACKET_DOUBLINGS: usize = 60;
const BISECTION_STEPS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Sub,
    Super,
}

impl Side {
    /// Offset of the band midpoint from `f`.
    pub fn target_offset(self, eps: f64) -> f64 {
        match self {
            Side::Sub => -0.5 * eps,
            Side::Super => 0.5 * eps,
        }
    }

    /// Band for the defect `T P - f`.
    pub fn band(self, eps: f64) -> (f64, f64) {
        match self {
            Side::Sub => (-eps, 0.0),
            Side::Super => (0.0, eps),
        }
    }

    pub fn contains(self, eps: f64, defect: f64, tol: f64) -> bool {
        let (lo, hi) = self.band(eps);
        defect >= lo - tol && defect <= hi + tol
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatchError {
    #[error("no sign change found for any solve-for coefficient")]
    NoBracket,
    #[error("radius fell below {min} without satisfying the band")]
    RadiusUnderflow { min: f64 },
    #[error("evaluation fault: {0}")]
    EvalFault(EvalFault),
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("operator has no jet variable to solve for")]
    NothingToSolve,
}

impl From<EvalFault> for PatchError {
    fn from(e: EvalFault) -> Self {
        PatchError::EvalFault(e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub samples_per_axis: usize,
    pub radius_cap: f64,
    pub min_radius: f64,
    /// Degree of defect flattening beyond the operator order.
    pub extra_degree: u32,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            samples_per_axis: 5,
            radius_cap: 0.25,
            min_radius: 1e-3,
            extra_degree: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectStats {
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalPatch {
    pub center: Vec<f64>,
    pub radius: f64,
    pub poly: JetPolynomial,
    pub epsilon: f64,
    pub side: Side,
    pub solve_for: MultiIndex,
    pub defect_stats: DefectStats,
}

impl LocalPatch {
    pub fn defect_at(&self, op: &OperatorSpec, f: &Field, x: &[f64]) -> Result<f64, EvalFault> {
        poly_defect(op, f, &self.poly, x)
    }
}

/// `(T P)(x) - f(x)` evaluated from the exact jet of `P`.
pub fn poly_defect(op: &OperatorSpec, f: &Field, poly: &JetPolynomial, x: &[f64]) -> Result<f64, EvalFault> {
    let t = op.eval_operator(x, &|p| Some(poly.derivative_at(p, x)))?;
    Ok(t - f.eval(x)?)
}

/// Construction sample set: the center, `samples` points along each half
/// axis, and `samples` points along each diagonal direction.
pub fn sample_points(center: &[f64], radius: f64, samples: usize) -> Vec<Vec<f64>> {
    let n = center.len();
    let mut pts = vec![center.to_vec()];
    for k in 1..=samples {
        let r = radius * k as f64 / samples as f64;
        for axis in 0..n {
            for sign in [-1.0, 1.0] {
                let mut p = center.to_vec();
                p[axis] += sign * r;
                pts.push(p);
            }
        }
        if n > 1 {
            let d = r / (n as f64).sqrt();
            for mask in 0..(1usize << n) {
                let p = center
                    .iter()
                    .enumerate()
                    .map(|(i, c)| if mask >> i & 1 == 1 { c + d } else { c - d })
                    .collect();
                pts.push(p);
            }
        }
    }
    pts
}

/// Lower-band patch (`f - eps <= T P <= f`).
pub fn local_subsolution(
    op: &OperatorSpec,
    f: &Field,
    x0: &[f64],
    eps: f64,
    seed: Option<&JetPolynomial>,
    cfg: &PatchConfig,
) -> Result<LocalPatch, PatchError> {
    local_patch(op, f, x0, eps, Side::Sub, seed, cfg)
}

/// Upper-band patch (`f <= T P <= f + eps`).
pub fn local_supersolution(
    op: &OperatorSpec,
    f: &Field,
    x0: &[f64],
    eps: f64,
    seed: Option<&JetPolynomial>,
    cfg: &PatchConfig,
) -> Result<LocalPatch, PatchError> {
    local_patch(op, f, x0, eps, Side::Super, seed, cfg)
}

pub fn local_patch(
    op: &OperatorSpec,
    f: &Field,
    x0: &[f64],
    eps: f64,
    side: Side,
    seed: Option<&JetPolynomial>,
    cfg: &PatchConfig,
) -> Result<LocalPatch, PatchError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(PatchError::InvalidEpsilon(eps));
    }
    let candidates = op.free_jet_variables();
    if candidates.is_empty() {
        return Err(PatchError::NothingToSolve);
    }
    let base = seeded_poly(x0, op.order() + cfg.extra_degree, seed);

    let mut last_err = PatchError::NoBracket;
    for head in &candidates {
        match patch_for_head(op, f, x0, eps, side, &base, head, cfg) {
            Ok(p) => return Ok(p),
            Err(e @ PatchError::RadiusUnderflow { .. }) => return Err(e),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

/// Patch with a fixed solve-for coefficient.
#[allow(clippy::too_many_arguments)]
pub fn local_patch_for(
    op: &OperatorSpec,
    f: &Field,
    x0: &[f64],
    eps: f64,
    side: Side,
    seed: Option<&JetPolynomial>,
    head: &MultiIndex,
    cfg: &PatchConfig,
) -> Result<LocalPatch, PatchError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(PatchError::InvalidEpsilon(eps));
    }
    let base = seeded_poly(x0, op.order() + cfg.extra_degree, seed);
    patch_for_head(op, f, x0, eps, side, &base, head, cfg)
}

#[allow(clippy::too_many_arguments)]
fn patch_for_head(
    op: &OperatorSpec,
    f: &Field,
    x0: &[f64],
    eps: f64,
    side: Side,
    base: &JetPolynomial,
    head: &MultiIndex,
    cfg: &PatchConfig,
) -> Result<LocalPatch, PatchError> {
    let target = f.eval(x0)? + side.target_offset(eps);
    let mut poly = base.clone();
    solve_head(op, x0, &mut poly, head, target)?;
    prolong(op, f, x0, &mut poly, head, cfg.extra_degree);
    let (radius, stats) = fit_radius(op, f, &poly, x0, eps, side, cfg)?;
    Ok(LocalPatch {
        center: x0.to_vec(),
        radius,
        poly,
        epsilon: eps,
        side,
        solve_for: head.clone(),
        defect_stats: stats,
    })
}

fn seeded_poly(x0: &[f64], degree: u32, seed: Option<&JetPolynomial>) -> JetPolynomial {
    let mut poly = JetPolynomial::zero(x0.to_vec(), degree);
    if let Some(s) = seed {
        let s = if s.center() == x0 { s.clone() } else { s.recenter(x0) };
        for (p, v) in s.coeffs() {
            if p.degree() <= degree {
                poly.set(p.clone(), *v);
            }
        }
    }
    poly
}

/// Bisection on `F(x0, jet(t)) - target` for the coefficient `head`.
fn solve_head(
    op: &OperatorSpec,
    x0: &[f64],
    poly: &mut JetPolynomial,
    head: &MultiIndex,
    target: f64,
) -> Result<(), PatchError> {
    let seed = poly.coeff(head);
    let g = |t: f64| -> Result<f64, EvalFault> {
        let v = op.eval_operator(x0, &|p| Some(if p == head { t } else { poly.coeff(p) }))?;
        Ok(v - target)
    };
    if let Ok(0.0) = g(seed) {
        return Ok(());
    }
    let mut width = 1.0;
    let mut bracket = None;
    for _ in 0..=BRACKET_DOUBLINGS {
        let (a, b) = (seed - width, seed + width);
        let (ga, gm, gb) = (g(a), g(seed), g(b));
        if let (Ok(gm), Ok(gb)) = (gm, gb) {
            if gm.signum() != gb.signum() {
                bracket = Some((seed, gm, b));
                break;
            }
        }
        if let (Ok(ga), Ok(gm)) = (ga, gm) {
            if ga.signum() != gm.signum() {
                bracket = Some((a, ga, seed));
                break;
            }
        }
        if let (Ok(ga), Ok(gb), Err(_)) = (ga, gb, gm) {
            if ga.signum() != gb.signum() {
                bracket = Some((a, ga, b));
                break;
            }
        }
        width *= 2.0;
    }
    let (mut lo, mut glo, mut hi) = bracket.ok_or(PatchError::NoBracket)?;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let gm = g(mid)?;
        if gm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    let root = match (g(lo), g(hi)) {
        (Ok(a), Ok(b)) if b.abs() < a.abs() => hi,
        (Ok(_), _) => lo,
        (Err(_), Ok(_)) => hi,
        (Err(e), Err(_)) => return Err(e.into()),
    };
    poly.set(head.clone(), root);
    Ok(())
}

struct SeriesEnv<'a> {
    layout: &'a Arc<SeriesLayout>,
    x0: &'a [f64],
    poly: &'a JetPolynomial,
}

impl Env<Series> for SeriesEnv<'_> {
    fn constant(&self, c: f64) -> Series {
        Series::constant(self.layout, c)
    }
    fn coord(&self, i: usize) -> Option<Series> {
        self.x0.get(i).map(|&b| Series::variable(self.layout, i, b))
    }
    fn jet(&self, p: &MultiIndex) -> Option<Series> {
        // D^p P(x0 + s) = sum_r a_{p+r} s^r / r!
        Some(Series::from_fn(self.layout, |r| self.poly.coeff(&p.add(r)) / r.factorial()))
    }
    fn label(&self, _: &str) -> Option<Series> {
        None
    }
}

fn defect_series(
    op: &OperatorSpec,
    f: &Field,
    layout: &Arc<SeriesLayout>,
    x0: &[f64],
    poly: &JetPolynomial,
) -> Result<Series, EvalFault> {
    let env = SeriesEnv { layout, x0, poly };
    let t: Series = eval_scalar(op.lhs(), &env)?;
    let fs: Series = eval_scalar(f.expr(), &env)?;
    Ok(t.sub(&fs))
}

/// Zero the defect's Taylor coefficients of degree `1..=extra` at `x0`.
///
/// At degree `k` the coefficients of `s^r`, `|r| = k`, are affine in the
/// unknowns `a_{head+r}`; the square system is assembled by unit probes and
/// solved directly. Prolongation stops at the first degree that faults or is
/// singular.
fn prolong(op: &OperatorSpec, f: &Field, x0: &[f64], poly: &mut JetPolynomial, head: &MultiIndex, extra: u32) {
    let n = x0.len();
    for k in 1..=extra {
        let layout = SeriesLayout::new(n, k);
        let level: Vec<MultiIndex> = layout.indices().iter().filter(|r| r.degree() == k).cloned().collect();
        let unknowns: Vec<MultiIndex> = level.iter().map(|r| head.add(r)).collect();
        let residual = |poly: &JetPolynomial| -> Option<Vec<f64>> {
            let d = defect_series(op, f, &layout, x0, poly).ok()?;
            Some(level.iter().map(|r| d.coeff(r)).collect())
        };
        let Some(c0) = residual(poly) else { return };
        let mut jac = vec![vec![0.0; unknowns.len()]; level.len()];
        for (j, u) in unknowns.iter().enumerate() {
            let mut probe = poly.clone();
            probe.set(u.clone(), poly.coeff(u) + 1.0);
            let Some(c1) = residual(&probe) else { return };
            for (row, (a, b)) in jac.iter_mut().zip(c1.iter().zip(&c0)) {
                row[j] = a - b;
            }
        }
        let rhs: Vec<f64> = c0.iter().map(|c| -c).collect();
        let Some(step) = solve_dense(jac, rhs) else { return };
        for (u, d) in unknowns.iter().zip(step) {
            poly.set(u.clone(), poly.coeff(u) + d);
        }
    }
}

/// Square solve by LU; `None` when (numerically) singular.
fn solve_dense(a: Vec<Vec<f64>>, b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let scale = m.amax();
    let lu = m.lu();
    if lu.u().diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
        return None;
    }
    let x = lu.solve(&DVector::from_vec(b))?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

fn fit_radius(
    op: &OperatorSpec,
    f: &Field,
    poly: &JetPolynomial,
    x0: &[f64],
    eps: f64,
    side: Side,
    cfg: &PatchConfig,
) -> Result<(f64, DefectStats), PatchError> {
    let mut radius = cfg.radius_cap;
    while radius >= cfg.min_radius {
        let mut stats = DefectStats {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        let ok = sample_points(x0, radius, cfg.samples_per_axis).iter().all(|x| {
            match poly_defect(op, f, poly, x) {
                Ok(d) if side.contains(eps, d, 0.0) => {
                    stats.min = stats.min.min(d);
                    stats.max = stats.max.max(d);
                    true
                }
                _ => false,
            }
        });
        if ok {
            return Ok((radius, stats));
        }
        radius *= 0.5;
    }
    Err(PatchError::RadiusUnderflow { min: cfg.min_radius })
}
