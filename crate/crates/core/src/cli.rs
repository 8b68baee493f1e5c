//! Command-line front end.
//!
//! Exit codes: 0 ok, 1 audit failure, 2 bad input, 3 solver failure, 4 I/O.

use crate::bench::{builtin_cases, builtin_sources, run_case, BenchmarkCase, CaseReport, RunOptions};
use crate::fnspaces::{FnError, PiecewiseFn, SingularMask};
use crate::hausdorff::IntervalFn;
use crate::solver::{audit_band, audit_patch, CutSolution, PatchAudit, Side};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_AUDIT: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "ordcut", version, about = "Interval solutions of nonlinear PDEs by order completion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the two-sided cut for a problem and write the artifact bundle.
    Solve(SolveArgs),
    /// Audit a candidate grid function against a problem's defect band.
    Verify(VerifyArgs),
    /// Run the builtin benchmark suite.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Tuning {
    /// Nodes per axis: `N` for every axis or `N,M,...`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long)]
    pub levels: Option<usize>,
    /// Truncation allowance factor.
    #[arg(long)]
    pub allow: Option<f64>,
    #[arg(long)]
    pub samples_per_axis: Option<usize>,
    #[arg(long)]
    pub radius_cap: Option<f64>,
    #[arg(long)]
    pub retry_budget: Option<usize>,
    /// Seed for the jittered patch audit.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "ORDCUT_JOBS", default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Case file, or the name of a builtin case.
    #[arg(long)]
    pub problem: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub tuning: Tuning,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BandArg {
    Sub,
    Super,
    /// `[-eps, eps]`.
    Both,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub problem: String,
    /// PiecewiseFn, IntervalFn, or level JSON written by `solve`.
    #[arg(long)]
    pub candidate: PathBuf,
    /// Band width; defaults to the level's epsilon or the case's finest one.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum)]
    pub side: Option<BandArg>,
    #[arg(long)]
    pub allow: Option<f64>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Run only the case with this name.
    pub filter: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: Tuning,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    fail(EXIT_IO, format!("{}: {e}", path.display()))
}

/// Parses `args` and runs the command, writing human output to `out`.
pub fn run<I, T>(args: I, out: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = write!(out, "{e}");
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(out, "error: {}", f.message);
            f.code
        }
    }
}

fn parse_grid(spec: &str, dim: usize) -> Result<Vec<usize>, Failure> {
    let parts: Result<Vec<usize>, _> = spec.split([',', 'x']).map(|s| s.trim().parse::<usize>()).collect();
    let parts = parts.map_err(|_| fail(EXIT_INPUT, format!("bad --grid `{spec}`")))?;
    match parts.len() {
        1 => Ok(vec![parts[0]; dim]),
        n if n == dim => Ok(parts),
        n => Err(fail(EXIT_INPUT, format!("--grid has {n} entries, problem has {dim} axes"))),
    }
}

fn options(t: &Tuning, dim: usize) -> Result<RunOptions, Failure> {
    let positive = |v: Option<f64>, name: &str| match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(fail(EXIT_INPUT, format!("--{name} must be positive"))),
        _ => Ok(()),
    };
    positive(t.eps0, "eps0")?;
    positive(t.allow, "allow")?;
    positive(t.radius_cap, "radius-cap")?;
    if let Some(k) = t.levels {
        if !(1..=30).contains(&k) {
            return Err(fail(EXIT_INPUT, "--levels must be in 1..=30"));
        }
    }
    if t.samples_per_axis == Some(0) || t.retry_budget == Some(0) || t.jobs == 0 {
        return Err(fail(EXIT_INPUT, "counts must be positive"));
    }
    Ok(RunOptions {
        resolution: t.grid.as_deref().map(|g| parse_grid(g, dim)).transpose()?,
        eps0: t.eps0,
        levels: t.levels,
        allow_factor: t.allow,
        samples_per_axis: t.samples_per_axis,
        radius_cap: t.radius_cap,
        retry_budget: t.retry_budget,
    })
}

/// A builtin name or a case file path.
fn load_problem(spec: &str) -> Result<BenchmarkCase, Failure> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some((_, src)) = builtin_sources().iter().find(|(n, _)| *n == spec) {
            return BenchmarkCase::from_toml(src).map_err(|e| fail(EXIT_INPUT, e.to_string()));
        }
    }
    let src = std::fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    BenchmarkCase::from_toml(&src).map_err(|e| fail(EXIT_INPUT, format!("{spec}: {e}")))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    metadata: Metadata,
    payload: &'a T,
}

/// Everything run-dependent lives here so payloads stay comparable.
#[derive(Serialize)]
struct Metadata {
    tool: &'static str,
    version: &'static str,
    generated_unix: u64,
}

fn metadata() -> Metadata {
    Metadata {
        tool: "ordcut",
        version: env!("CARGO_PKG_VERSION"),
        generated_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| io_fail(path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Level file written next to the CSVs; `verify` reads it back.
#[derive(Serialize, Deserialize)]
struct LevelFile {
    level: usize,
    side: Side,
    epsilon: f64,
    allowance: f64,
    #[serde(rename = "fn")]
    function: PiecewiseFn,
}

fn level_stem(level: usize, side: Side) -> String {
    let s = match side {
        Side::Sub => "sub",
        Side::Super => "super",
    };
    format!("level_{level}_{s}")
}

#[derive(Serialize)]
struct SolveReport<'a> {
    case: &'a CaseReport,
    patch_audit: PatchAudit,
    seed: u64,
}

fn cmd_solve(a: &SolveArgs, out: &mut dyn std::io::Write) -> Result<i32, Failure> {
    let case = load_problem(&a.problem)?;
    let opts = options(&a.tuning, case.grid.dim())?;
    let case = crate::bench::configure(&case, &opts).map_err(|e| fail(EXIT_INPUT, e.to_string()))?;
    let run = run_case(&case, &RunOptions::default());

    let levels_dir = a.out.join("levels");
    std::fs::create_dir_all(&levels_dir).map_err(|e| io_fail(&levels_dir, e))?;
    let mut audit = PatchAudit::default();
    if let Some(sol) = &run.solution {
        let mut rng = ChaCha8Rng::seed_from_u64(a.tuning.seed);
        let samples = case.config.solver.patch.samples_per_axis;
        for l in &sol.levels {
            for p in &l.approx.patches {
                audit.merge(&audit_patch(&case.op, &case.f, p, samples, 2, 1e-9, &mut rng));
            }
        }
        write_bundle(a, &case, sol, &levels_dir)?;
    }
    let report = SolveReport {
        case: &run.report,
        patch_audit: audit,
        seed: a.tuning.seed,
    };
    let path = a.out.join("report.json");
    write_file(
        &path,
        &to_json(&Envelope {
            metadata: metadata(),
            payload: &report,
        }),
    )?;
    let r = &run.report;
    let _ = writeln!(out, "case {} on {:?}", r.name, r.resolution);
    if let Some(d) = r.image_defect {
        let _ = writeln!(out, "image_defect {d:e} (allowance {:e})", r.allowance);
    }
    for c in &r.checks {
        let mark = if c.pass { "ok  " } else { "FAIL" };
        let _ = writeln!(out, "{mark} {} = {:e} {} {:e}", c.name, c.value, c.relation, c.threshold);
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    match &r.error {
        Some(e) => Err(fail(EXIT_SOLVER, e.clone())),
        None => Ok(EXIT_OK),
    }
}

fn write_bundle(a: &SolveArgs, case: &BenchmarkCase, sol: &CutSolution, levels_dir: &Path) -> Result<(), Failure> {
    write_file(&a.out.join("cut.json"), &to_json(&sol.to_json()))?;
    let coords = case.op.coords();
    let mut csvs = Vec::new();
    for l in &sol.levels {
        let stem = level_stem(l.level, l.approx.side);
        let csv = format!("levels/{stem}.csv");
        write_file(&a.out.join(&csv), &l.approx.function.to_csv(coords))?;
        let file = LevelFile {
            level: l.level,
            side: l.approx.side,
            epsilon: l.approx.epsilon,
            allowance: sol.allowance,
            function: l.approx.function.clone(),
        };
        write_file(&levels_dir.join(format!("{stem}.json")), &to_json(&file))?;
        csvs.push((csv, l.level, l.approx.side));
    }
    write_file(&a.out.join("plot.gp"), &plot_script(coords, &csvs))
}

fn plot_script(coords: &[String], csvs: &[(String, usize, Side)]) -> String {
    let mut s = String::new();
    s.push_str("# gnuplot script; run from the output directory: gnuplot -p plot.gp\n");
    s.push_str("set datafile separator ','\nset datafile missing 'NaN'\nset key outside\n");
    let value_col = coords.len() + 1;
    let plots: Vec<String> = csvs
        .iter()
        .map(|(f, k, side)| {
            let using = match coords.len() {
                1 => format!("1:{value_col}"),
                _ => format!("1:2:{value_col}"),
            };
            format!("'{f}' skip 1 using {using} with points pt 7 ps 0.3 title 'level {k} {side:?}'")
        })
        .collect();
    match coords.len() {
        1 => {
            let _ = writeln!(s, "set xlabel '{}'\nset ylabel 'u'", coords[0]);
            let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
        }
        _ => {
            let _ = writeln!(s, "set xlabel '{}'\nset ylabel '{}'\nset zlabel 'u'", coords[0], coords[1]);
            let _ = writeln!(s, "splot {}", plots.join(", \\\n      "));
        }
    }
    s
}

#[derive(Serialize)]
struct VerifyReport {
    epsilon: f64,
    band: (f64, f64),
    allowance: f64,
    checked: usize,
    pass_fraction: f64,
    defect_min: Option<f64>,
    defect_max: Option<f64>,
    gamma_fraction: f64,
    gamma_nowhere_dense: bool,
}

/// Reads any of the candidate formats into a grid function plus the band
/// recorded with it, if any.
fn read_candidate(text: &str) -> Result<(PiecewiseFn, Option<(f64, Side)>), Failure> {
    if let Ok(l) = serde_json::from_str::<LevelFile>(text) {
        return Ok((l.function, Some((l.epsilon, l.side))));
    }
    if let Ok(u) = serde_json::from_str::<PiecewiseFn>(text) {
        return Ok((u, None));
    }
    match serde_json::from_str::<IntervalFn>(text) {
        Ok(h) => {
            // degenerate cells are the defined values; the rest is masked
            let g = h.grid().clone();
            let vals: Vec<f64> = h.cells().iter().map(|c| if c.is_degenerate() { c.lo() } else { f64::NAN }).collect();
            let mask = SingularMask::from_indices(&g, (0..g.len()).filter(|&i| !vals[i].is_finite()));
            let u = PiecewiseFn::new(g, vals, mask, u32::MAX).map_err(|e| fail(EXIT_INPUT, e.to_string()))?;
            Ok((u, None))
        }
        Err(e) => Err(fail(EXIT_INPUT, format!("candidate is not a grid function: {e}"))),
    }
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn std::io::Write) -> Result<i32, Failure> {
    let case = load_problem(&a.problem)?;
    let text = std::fs::read_to_string(&a.candidate).map_err(|e| io_fail(&a.candidate, e))?;
    let (u, recorded) = read_candidate(&text)?;
    if u.grid().dim() != case.op.dimension() {
        return Err(fail(
            EXIT_INPUT,
            FnError::DimensionMismatch {
                op: case.op.dimension(),
                grid: u.grid().dim(),
            }
            .to_string(),
        ));
    }
    let finest = case.eps0 / (1u64 << case.levels) as f64;
    let eps = a.eps.or(recorded.map(|r| r.0)).unwrap_or(finest);
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(fail(EXIT_INPUT, "--eps must be positive"));
    }
    let band = a.side.unwrap_or(match recorded {
        Some((_, Side::Sub)) => BandArg::Sub,
        Some((_, Side::Super)) => BandArg::Super,
        None => BandArg::Both,
    });
    let mut cfg = case.config.clone();
    if let Some(f) = a.allow {
        cfg.allow_factor = f;
    }
    let allowance = crate::solver::truncation_allowance(&case.op, u.grid(), &case.f, &cfg);
    let (lo, hi) = match band {
        BandArg::Sub => Side::Sub.band(eps),
        BandArg::Super => Side::Super.band(eps),
        BandArg::Both => (-eps, eps),
    };
    let audit = audit_band(&case.op, &case.f, &u, lo, hi, allowance).map_err(|e| fail(EXIT_INPUT, e.to_string()))?;
    let report = VerifyReport {
        epsilon: eps,
        band: (lo, hi),
        allowance,
        checked: audit.checked,
        pass_fraction: audit.pass_fraction,
        defect_min: audit.min,
        defect_max: audit.max,
        gamma_fraction: u.mask().fraction(),
        gamma_nowhere_dense: u.mask().density_violation(u.grid()).is_none(),
    };
    let _ = write!(out, "{}", to_json(&report));
    Ok(if audit.checked > 0 && audit.failed.is_empty() {
        EXIT_OK
    } else {
        EXIT_AUDIT
    })
}

#[derive(Serialize)]
struct SuiteReport<'a> {
    cases: Vec<&'a CaseReport>,
    pass: bool,
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn std::io::Write) -> Result<i32, Failure> {
    let all = builtin_cases();
    let cases: Vec<BenchmarkCase> = match &a.filter {
        None => all,
        Some(name) => {
            let hit: Vec<_> = all.iter().filter(|c| &c.name == name).cloned().collect();
            if hit.is_empty() {
                let names: Vec<_> = all.iter().map(|c| c.name.as_str()).collect();
                return Err(fail(EXIT_INPUT, format!("unknown case `{name}`; available: {}", names.join(", "))));
            }
            hit
        }
    };
    let mut prepared = Vec::new();
    for c in &cases {
        let opts = options(&a.tuning, c.grid.dim())?;
        prepared.push((c, opts));
    }
    let jobs = a.tuning.jobs.max(1);
    let mut reports: Vec<Option<CaseReport>> = vec![None; prepared.len()];
    for (chunk_idx, chunk) in prepared.chunks(jobs).enumerate() {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|(c, o)| s.spawn(move || run_case(c, o).report))
                .collect();
            for (k, h) in handles.into_iter().enumerate() {
                reports[chunk_idx * jobs + k] = Some(h.join().expect("case thread panicked"));
            }
        });
    }
    let reports: Vec<CaseReport> = reports.into_iter().map(|r| r.expect("every case ran")).collect();
    let suite = SuiteReport {
        cases: reports.iter().collect(),
        pass: reports.iter().all(|r| r.pass),
    };
    for r in &reports {
        let status = if r.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{status} {}", r.name);
        for c in r.checks.iter().filter(|c| !c.pass) {
            let _ = writeln!(out, "     {} = {:e} (needs {} {:e})", c.name, c.value, c.relation, c.threshold);
        }
        if let Some(e) = &r.error {
            let _ = writeln!(out, "     error: {e}");
        }
    }
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
        write_file(
            &dir.join("report.json"),
            &to_json(&Envelope {
                metadata: metadata(),
                payload: &suite,
            }),
        )?;
    }
    Ok(if suite.pass { EXIT_OK } else { EXIT_AUDIT })
}
