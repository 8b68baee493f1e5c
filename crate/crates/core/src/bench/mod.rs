//! Builtin benchmark problems with independent oracles.

mod case;
mod oracle;
mod run;

pub use case::{
    BenchmarkCase, CaseError, CaseFile, DomainSpec, FacePin, FaceSide, OracleSpec, PinSpec, PointPin, SolverSpec,
    Tolerances,
};
pub use oracle::Oracle;
pub use run::{
    configure, fit_shock, oracle_audit, oracle_samples, run_case, CaseReport, CaseRun, Check, LevelSummary,
    RunOptions, ShockFit,
};

const RICCATI: &str = r#"
name = "riccati"
equation = "dt(u) = u^2"
coords = ["t"]

[domain]
lo = [0.0]
hi = [0.9]
resolution = [257]

[pins]
points = [{ at = [0.0], value = 1.0 }]

[oracle]
kind = "closed_form:1/(1-t)"

[solver]
eps0 = 0.4
levels = 4
# sup |u'''| / 6 of the oracle on [0, 0.9] is 1e4; the factor 10 supplies the rest
truncation_scale = 1000.0

[tolerances]
max_gamma = 0.15
"#;

const BURGERS: &str = r#"
name = "burgers_riemann"
equation = "dt(u) + u*dx(u) = 0"
coords = ["t", "x"]

[domain]
lo = [0.0, -1.0]
hi = [1.0, 1.0]
resolution = [129, 129]

# 1 for x < 0, 0 for x > 0; the expression faults at x = 0, leaving it free
[[pins.faces]]
axis = 0
side = "lo"
value = "(1 - abs(x)/x)/2"

[oracle]
kind = "characteristics"
left = 1.0
right = 0.0
jump = 0.0

[solver]
eps0 = 0.4
levels = 2

[tolerances]
shock_speed_tol = 0.1
"#;

const POISSON: &str = r#"
name = "poisson_square"
equation = "dxx(u) + dyy(u) = f"
coords = ["x", "y"]
f = "-2*pi^2*sin(pi*x)*sin(pi*y)"

[domain]
lo = [0.0, 0.0]
hi = [1.0, 1.0]
resolution = [64, 64]

[[pins.faces]]
axis = 0
side = "lo"
value = "0"

[[pins.faces]]
axis = 0
side = "hi"
value = "0"

[[pins.faces]]
axis = 1
side = "lo"
value = "0"

[[pins.faces]]
axis = 1
side = "hi"
value = "0"

[oracle]
kind = "closed_form:sin(pi*x)*sin(pi*y)"

[solver]
eps0 = 0.4
levels = 4

[tolerances]
oracle_residual = 0.01
"#;

const IDENTITY: &str = r#"
name = "identity_smoke"
equation = "u = 5"
coords = ["x", "y"]

[domain]
lo = [0.0, 0.0]
hi = [1.0, 1.0]
resolution = [11, 11]

[solver]
eps0 = 0.4
levels = 3
radius_cap = 2.0

[tolerances]
pass_fraction = 1.0
"#;

/// Source text of the builtin case files, in suite order.
pub fn builtin_sources() -> [(&'static str, &'static str); 4] {
    [
        ("riccati", RICCATI),
        ("burgers_riemann", BURGERS),
        ("poisson_square", POISSON),
        ("identity_smoke", IDENTITY),
    ]
}

pub fn builtin_cases() -> Vec<BenchmarkCase> {
    builtin_sources()
        .iter()
        .map(|(_, src)| BenchmarkCase::from_toml(src).expect("builtin case files are valid"))
        .collect()
}
