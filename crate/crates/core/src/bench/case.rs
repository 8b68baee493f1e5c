//! Case files and the builtin suite.

use super::oracle::Oracle;
use crate::expr::{parse, parse_with_coords, Field, OperatorSpec, ParseError, Rhs};
use crate::fnspaces::{FnError, Grid};
use crate::solver::{CutConfig, Pin};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("case file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("equation: {0}")]
    Parse(#[from] ParseError),
    #[error("domain: {0}")]
    Grid(#[from] FnError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub name: String,
    pub equation: String,
    pub coords: Option<Vec<String>>,
    /// Right-hand side when the equation names it by a label.
    pub f: Option<String>,
    pub domain: DomainSpec,
    #[serde(default)]
    pub pins: PinSpec,
    pub oracle: Option<OracleSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub resolution: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinSpec {
    #[serde(default)]
    pub points: Vec<PointPin>,
    #[serde(default)]
    pub faces: Vec<FacePin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointPin {
    pub at: Vec<f64>,
    pub value: f64,
}

/// Pins every node of a box face to an expression in the coordinates. Nodes
/// where the expression faults are left unpinned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacePin {
    pub axis: usize,
    pub side: FaceSide,
    pub value: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceSide {
    Lo,
    Hi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    /// `closed_form:<expr>` or `characteristics`.
    pub kind: String,
    pub left: Option<f64>,
    pub right: Option<f64>,
    pub jump: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub eps0: f64,
    pub levels: usize,
    pub radius_cap: Option<f64>,
    pub samples_per_axis: Option<usize>,
    pub extra_degree: Option<u32>,
    pub retry_budget: Option<usize>,
    pub allow_factor: Option<f64>,
    pub truncation_scale: Option<f64>,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            eps0: 0.4,
            levels: 4,
            radius_cap: None,
            samples_per_axis: None,
            extra_degree: None,
            retry_budget: None,
            allow_factor: None,
            truncation_scale: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub pass_fraction: f64,
    pub max_gamma: Option<f64>,
    /// Bound on `|T_h u* - f|`; defaults to the truncation allowance.
    pub oracle_residual: Option<f64>,
    pub oracle_containment: f64,
    pub shock_speed_tol: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            pass_fraction: 0.99,
            max_gamma: None,
            oracle_residual: None,
            oracle_containment: 0.99,
            shock_speed_tol: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkCase {
    pub name: String,
    pub equation: String,
    pub op: OperatorSpec,
    pub f: Field,
    pub grid: Grid,
    pub pins: Vec<Pin>,
    pub oracle: Option<Oracle>,
    pub eps0: f64,
    pub levels: usize,
    pub config: CutConfig,
    pub tolerances: Tolerances,
    pub file: CaseFile,
}

impl BenchmarkCase {
    pub fn from_toml(source: &str) -> Result<Self, CaseError> {
        Self::from_file(toml::from_str(source)?)
    }

    pub fn from_file(file: CaseFile) -> Result<Self, CaseError> {
        let source = file.clone();
        let op = match &file.coords {
            Some(c) => parse_with_coords(&file.equation, c)?,
            None => parse(&file.equation)?,
        };
        let coords = op.coords().to_vec();
        let f = match (op.rhs(), &file.f) {
            (Rhs::Label(_), Some(src)) => Field::parse(src, &coords)?,
            (Rhs::Label(l), None) => {
                return Err(CaseError::Invalid(format!("equation uses `{l}` but no `f` is given")));
            }
            (Rhs::Expr(e), None) => Field::new(e.clone(), coords.len())
                .map_err(|e| CaseError::Invalid(format!("right-hand side: {e}")))?,
            (Rhs::Expr(_), Some(_)) => {
                return Err(CaseError::Invalid("`f` given but the equation has an explicit right-hand side".into()));
            }
        };
        let d = &file.domain;
        let grid = Grid::new(d.lo.clone(), d.hi.clone(), d.resolution.clone())?;
        if grid.dim() != op.dimension() {
            return Err(FnError::DimensionMismatch { op: op.dimension(), grid: grid.dim() }.into());
        }
        let pins = build_pins(&file.pins, &grid, &coords)?;
        let oracle = file.oracle.as_ref().map(|o| build_oracle(o, &coords)).transpose()?;

        let s = &file.solver;
        if !(s.eps0 > 0.0 && s.eps0.is_finite()) || s.levels < 1 || s.levels > 30 {
            return Err(CaseError::Invalid("solver.eps0 must be positive and 1 <= levels <= 30".into()));
        }
        let mut config = CutConfig::default();
        let p = &mut config.solver.patch;
        p.radius_cap = s.radius_cap.unwrap_or(p.radius_cap);
        p.samples_per_axis = s.samples_per_axis.unwrap_or(p.samples_per_axis);
        p.extra_degree = s.extra_degree.unwrap_or(p.extra_degree);
        config.solver.retry_budget = s.retry_budget.unwrap_or(config.solver.retry_budget);
        config.allow_factor = s.allow_factor.unwrap_or(config.allow_factor);
        config.truncation_scale = s.truncation_scale;

        Ok(BenchmarkCase {
            name: file.name,
            equation: file.equation,
            op,
            f,
            grid,
            pins,
            oracle,
            eps0: s.eps0,
            levels: s.levels,
            config,
            tolerances: file.tolerances,
            file: source,
        })
    }

    /// The same case on another grid over the same box.
    pub fn with_resolution(&self, resolution: Vec<usize>) -> Result<Self, CaseError> {
        let mut file = self.file.clone();
        file.domain.resolution = resolution;
        let mut c = Self::from_file(file)?;
        c.eps0 = self.eps0;
        c.levels = self.levels;
        c.config = self.config.clone();
        Ok(c)
    }
}

fn build_pins(spec: &PinSpec, grid: &Grid, coords: &[String]) -> Result<Vec<Pin>, CaseError> {
    let mut pins: Vec<Pin> = spec
        .points
        .iter()
        .map(|p| Pin { point: p.at.clone(), value: p.value })
        .collect();
    for face in &spec.faces {
        if face.axis >= grid.dim() {
            return Err(CaseError::Invalid(format!("face axis {} out of range", face.axis)));
        }
        let value = Field::parse(&face.value, coords)?;
        let k = match face.side {
            FaceSide::Lo => 0,
            FaceSide::Hi => grid.resolution()[face.axis] - 1,
        };
        for i in 0..grid.len() {
            if grid.multi(i)[face.axis] != k {
                continue;
            }
            let x = grid.coords(i);
            if let Ok(v) = value.eval(&x) {
                pins.push(Pin { point: x, value: v });
            }
        }
    }
    Ok(pins)
}

fn build_oracle(spec: &OracleSpec, coords: &[String]) -> Result<Oracle, CaseError> {
    if let Some(src) = spec.kind.strip_prefix("closed_form:") {
        let field = Field::parse(src.trim(), coords)?;
        return Ok(Oracle::ClosedForm { source: src.trim().to_string(), field });
    }
    if spec.kind == "characteristics" {
        if coords.len() != 2 {
            return Err(CaseError::Invalid("characteristics oracle needs coordinates (t, x)".into()));
        }
        let need = |v: Option<f64>, k: &str| v.ok_or_else(|| CaseError::Invalid(format!("oracle.{k} missing")));
        return Ok(Oracle::Characteristics {
            left: need(spec.left, "left")?,
            right: need(spec.right, "right")?,
            jump: spec.jump.unwrap_or(0.0),
        });
    }
    Err(CaseError::Invalid(format!("unknown oracle kind `{}`", spec.kind)))
}
