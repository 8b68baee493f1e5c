//! Executing a case and auditing the result.

use super::case::BenchmarkCase;
use super::oracle::Oracle;
use crate::fnspaces::{apply_defect, PiecewiseFn, SingularMask};
use crate::solver::{refine_cut, CutSolution, GlobalApprox, Side};
use serde::{Deserialize, Serialize};

/// Command-line overrides of a case's defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub resolution: Option<Vec<usize>>,
    pub eps0: Option<f64>,
    pub levels: Option<usize>,
    pub allow_factor: Option<f64>,
    pub samples_per_axis: Option<usize>,
    pub radius_cap: Option<f64>,
    pub retry_budget: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `<=` or `>=`.
    pub relation: String,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            value,
            relation: "<=".into(),
            threshold,
            pass: value <= threshold,
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            value,
            relation: ">=".into(),
            threshold,
            pass: value >= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: usize,
    pub side: Side,
    pub epsilon: f64,
    pub patches: usize,
    pub gamma_fraction: f64,
    pub density_ok: bool,
    pub defect_min: Option<f64>,
    pub defect_max: Option<f64>,
    pub pass_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShockFit {
    pub speed: f64,
    pub intercept: f64,
    pub rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub name: String,
    pub equation: String,
    pub resolution: Vec<usize>,
    pub eps0: f64,
    pub levels: usize,
    pub epsilons: Vec<f64>,
    pub allowance: f64,
    pub oracle: Option<String>,
    pub oracle_residual: Option<f64>,
    pub oracle_containment: Option<f64>,
    pub error: Option<String>,
    pub image_defect: Option<f64>,
    pub level_summaries: Vec<LevelSummary>,
    pub shock: Option<ShockFit>,
    pub warnings: Vec<String>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub struct CaseRun {
    pub report: CaseReport,
    pub solution: Option<CutSolution>,
}

/// Applies overrides; grid-changing overrides rebuild pins on the new grid.
pub fn configure(case: &BenchmarkCase, opts: &RunOptions) -> Result<BenchmarkCase, super::CaseError> {
    let mut c = match &opts.resolution {
        Some(r) => case.with_resolution(r.clone())?,
        None => case.clone(),
    };
    if let Some(e) = opts.eps0 {
        c.eps0 = e;
    }
    if let Some(k) = opts.levels {
        c.levels = k;
    }
    if let Some(a) = opts.allow_factor {
        c.config.allow_factor = a;
    }
    if let Some(s) = opts.samples_per_axis {
        c.config.solver.patch.samples_per_axis = s;
    }
    if let Some(r) = opts.radius_cap {
        c.config.solver.patch.radius_cap = r;
    }
    if let Some(b) = opts.retry_budget {
        c.config.solver.retry_budget = b;
    }
    Ok(c)
}

/// Samples the oracle; nodes where it faults or jumps between lattice
/// neighbours are masked so stencils do not straddle a discontinuity.
pub fn oracle_samples(case: &BenchmarkCase, oracle: &Oracle) -> PiecewiseFn {
    let g = &case.grid;
    let vals: Vec<f64> = (0..g.len()).map(|i| oracle.eval(&g.coords(i)).unwrap_or(f64::NAN)).collect();
    let mut mask = SingularMask::empty(g);
    for i in 0..g.len() {
        let jumps = matches!(oracle, Oracle::Characteristics { left, right, .. }
            if g.neighbors(i).iter().any(|&j| (vals[j] - vals[i]).abs() > 0.5 * (left - right).abs()));
        if !vals[i].is_finite() || jumps {
            mask.mark(i);
        }
    }
    PiecewiseFn::new(g.clone(), vals, mask, u32::MAX).expect("sampled on its own grid")
}

/// `(max |T_h u* - f|, fraction of nodes with |T_h u* - f| <= bound)` over
/// nodes the stencil reaches.
pub fn oracle_audit(case: &BenchmarkCase, oracle: &Oracle, bound: f64) -> Option<(f64, f64)> {
    let u = oracle_samples(case, oracle);
    let applied = apply_defect(&case.op, &case.f, &u).ok()?;
    let d: Vec<f64> = (0..case.grid.len()).filter_map(|i| applied.function.value(i)).collect();
    if d.is_empty() {
        return None;
    }
    let max = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let inside = d.iter().filter(|v| v.abs() <= bound).count() as f64 / d.len() as f64;
    Some((max, inside))
}

/// Locates, on every time row after the first, the masked gap separating
/// values nearer `left` from values nearer `right`, and fits `x = a + s t`.
pub fn fit_shock(approx: &[&GlobalApprox], left: f64, right: f64) -> Option<ShockFit> {
    let mut pts = Vec::new();
    for a in approx {
        let u = &a.function;
        let g = u.grid();
        let (nt, nx) = (g.resolution()[0], g.resolution()[1]);
        for it in 1..nt {
            let row: Vec<(f64, f64)> = (0..nx)
                .filter_map(|ix| u.value(g.index(&[it, ix])).map(|v| (g.coord(1, ix), v)))
                .collect();
            let nearer_left = |v: f64| (v - left).abs() < (v - right).abs();
            if let Some(w) = row.windows(2).find(|w| nearer_left(w[0].1) && !nearer_left(w[1].1)) {
                pts.push((g.coord(0, it), 0.5 * (w[0].0 + w[1].0)));
            }
        }
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mt, mx) = pts.iter().fold((0.0, 0.0), |(a, b), (t, x)| (a + t / n, b + x / n));
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, x)| (a + (t - mt) * (x - mx), b + (t - mt) * (t - mt)));
    if sxx == 0.0 {
        return None;
    }
    let speed = sxy / sxx;
    Some(ShockFit {
        speed,
        intercept: mx - speed * mt,
        rows: pts.len(),
    })
}

pub fn run_case(case: &BenchmarkCase, opts: &RunOptions) -> CaseRun {
    let case = match configure(case, opts) {
        Ok(c) => c,
        Err(e) => {
            let mut r = empty_report(case);
            r.error = Some(e.to_string());
            return CaseRun { report: r, solution: None };
        }
    };
    let mut report = empty_report(&case);
    let tol = &case.tolerances;
    let eps_k = case.eps0 / (1u64 << case.levels) as f64;
    report.allowance = crate::solver::truncation_allowance(&case.op, &case.grid, &case.f, &case.config);

    if let Some(o) = &case.oracle {
        let bound = eps_k + report.allowance;
        if let Some((res, inside)) = oracle_audit(&case, o, bound) {
            report.oracle_residual = Some(res);
            report.oracle_containment = Some(inside);
            let limit = tol.oracle_residual.unwrap_or(report.allowance);
            report.checks.push(Check::at_most("oracle_residual", res, limit));
            report.checks.push(Check::at_least("oracle_containment", inside, tol.oracle_containment));
        }
    }

    let solution = match refine_cut(&case.op, &case.f, &case.grid, case.eps0, case.levels, &case.pins, &case.config) {
        Ok(s) => s,
        Err(fail) => {
            report.error = Some(fail.to_string());
            report.pass = false;
            if let Some(p) = fail.partial {
                summarize(&mut report, &p);
            }
            return CaseRun { report, solution: None };
        }
    };
    summarize(&mut report, &solution);

    let finest: Vec<_> = [Side::Sub, Side::Super].iter().filter_map(|&s| solution.finest(s)).collect();
    let pass_fraction = finest.iter().map(|l| l.defect.pass_fraction).fold(1.0, f64::min);
    report.checks.push(Check::at_least("defect_pass_fraction", pass_fraction, tol.pass_fraction));
    report
        .checks
        .push(Check::at_most("image_defect", solution.image_defect, eps_k + solution.allowance));
    let violations = solution.levels.iter().filter(|l| l.approx.density_violation.is_some()).count();
    report.checks.push(Check::at_most("dense_masks", violations as f64, 0.0));
    if let Some(g) = tol.max_gamma {
        let worst = finest.iter().map(|l| l.approx.gamma_fraction()).fold(0.0, f64::max);
        report.checks.push(Check::at_most("gamma_fraction", worst, g));
    }
    if let (Some(Oracle::Characteristics { left, right, .. }), Some(t)) = (&case.oracle, tol.shock_speed_tol) {
        let approx: Vec<&GlobalApprox> = finest.iter().map(|l| &l.approx).collect();
        report.shock = fit_shock(&approx, *left, *right);
        let target = case.oracle.as_ref().and_then(Oracle::shock_speed).unwrap_or(f64::NAN);
        let err = report.shock.as_ref().map_or(f64::INFINITY, |s| (s.speed - target).abs());
        report.checks.push(Check::at_most("shock_speed_error", err, t));
    }
    report.pass = report.error.is_none() && report.checks.iter().all(|c| c.pass);
    CaseRun {
        report,
        solution: Some(solution),
    }
}

fn empty_report(case: &BenchmarkCase) -> CaseReport {
    CaseReport {
        name: case.name.clone(),
        equation: case.equation.clone(),
        resolution: case.grid.resolution().to_vec(),
        eps0: case.eps0,
        levels: case.levels,
        epsilons: Vec::new(),
        allowance: 0.0,
        oracle: case.oracle.as_ref().map(Oracle::describe),
        oracle_residual: None,
        oracle_containment: None,
        error: None,
        image_defect: None,
        level_summaries: Vec::new(),
        shock: None,
        warnings: Vec::new(),
        checks: Vec::new(),
        pass: false,
    }
}

fn summarize(report: &mut CaseReport, s: &CutSolution) {
    report.epsilons = s.epsilons.clone();
    report.image_defect = Some(s.image_defect);
    report.level_summaries = s
        .levels
        .iter()
        .map(|l| LevelSummary {
            level: l.level,
            side: l.approx.side,
            epsilon: l.approx.epsilon,
            patches: l.approx.patches.len(),
            gamma_fraction: l.approx.gamma_fraction(),
            density_ok: l.approx.density_violation.is_none(),
            defect_min: l.defect.min,
            defect_max: l.defect.max,
            pass_fraction: l.defect.pass_fraction,
        })
        .collect();
    for l in &s.levels {
        for w in &l.approx.warnings {
            report.warnings.push(format!("level {} {:?}: {w}", l.level, l.approx.side));
        }
    }
}
