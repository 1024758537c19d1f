//! Post-execution audit of computed solutions. Only declared invariants
//! are checked; the declarations come from a spec's optional
//! `## Invariants` section or from JSON.

mod checks;
mod field;
mod residual;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specmd::SpecDocument;

pub use checks::{
    check_bounds, check_bounds_series, check_conservation, check_entropy, check_finite, check_monotonicity, check_symmetry,
    check_symmetry_series, CheckId, CheckResult, CheckStatus, Direction, Functional, CONSERVATION_FLOOR, CONSERVATION_TOL,
};
pub use field::{FieldError, SolutionField, SolutionSeries};
pub use residual::{
    check_residual, evaluator_for, poisson_lambda_min, rms_interior_difference, HeatEvaluator, PoissonEvaluator,
    ResidualContext, ResidualEstimate, ResidualEvaluator,
};

/// Name of the optional spec section holding audit declarations.
pub const SECTION_INVARIANTS: &str = "Invariants";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("no residual evaluator for archetype `{0}`")]
    NoEvaluator(String),
    #[error("residual evaluation failed: {0}")]
    Evaluator(String),
    #[error("{0} check requested without a declaration")]
    NothingDeclared(&'static str),
    #[error("axis {axis} out of range for a {dims}-dimensional field")]
    BadAxis { axis: usize, dims: usize },
    #[error("quadrature weights have length {got}, field has {expected} values")]
    WeightLength { expected: usize, got: usize },
    #[error("invalid declaration `{key}`: {reason}")]
    Declaration { key: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotoneDecl {
    pub functional: Functional,
    pub direction: Direction,
}

fn default_conservation_tol() -> f64 {
    CONSERVATION_TOL
}
fn default_tight() -> f64 {
    1e-12
}
fn default_symmetry_tol() -> f64 {
    1e-10
}

/// Declared invariants and their tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Declarations {
    #[serde(default)]
    pub conservation: bool,
    #[serde(default = "default_conservation_tol")]
    pub conservation_tol: f64,
    #[serde(default)]
    pub lower_bound: Option<f64>,
    #[serde(default)]
    pub upper_bound: Option<f64>,
    #[serde(default = "default_tight")]
    pub bounds_tol: f64,
    #[serde(default)]
    pub monotonicity: Option<MonotoneDecl>,
    #[serde(default = "default_tight")]
    pub monotonicity_tol: f64,
    #[serde(default)]
    pub symmetry_axis: Option<usize>,
    #[serde(default = "default_symmetry_tol")]
    pub symmetry_tol: f64,
    /// Square-entropy inequality for scalar conservation laws.
    #[serde(default)]
    pub entropy: bool,
    #[serde(default = "default_tight")]
    pub entropy_tol: f64,
}

impl Default for Declarations {
    fn default() -> Self {
        Declarations {
            conservation: false,
            conservation_tol: CONSERVATION_TOL,
            lower_bound: None,
            upper_bound: None,
            bounds_tol: 1e-12,
            monotonicity: None,
            monotonicity_tol: 1e-12,
            symmetry_axis: None,
            symmetry_tol: 1e-10,
            entropy: false,
            entropy_tol: 1e-12,
        }
    }
}

fn decl_err(key: &str, reason: impl Into<String>) -> AuditError {
    AuditError::Declaration { key: key.to_string(), reason: reason.into() }
}

fn parse_real(key: &str, v: &str) -> Result<f64, AuditError> {
    v.trim().parse().map_err(|_| decl_err(key, format!("`{v}` is not a number")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, AuditError> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "declared" => Ok(true),
        "false" | "no" | "none" => Ok(false),
        other => Err(decl_err(key, format!("`{other}` is not a boolean"))),
    }
}

impl Declarations {
    pub fn is_empty(&self) -> bool {
        !self.conservation
            && self.lower_bound.is_none()
            && self.upper_bound.is_none()
            && self.monotonicity.is_none()
            && self.symmetry_axis.is_none()
            && !self.entropy
    }

    /// Reads the `## Invariants` section; a spec without one declares
    /// nothing.
    pub fn from_spec(doc: &SpecDocument) -> Result<Self, AuditError> {
        let mut d = Declarations::default();
        let Some(section) = doc.section(SECTION_INVARIANTS) else {
            return Ok(d);
        };
        for e in &section.entries {
            let key = e.key.as_str();
            let v = e.text().unwrap_or_default();
            match key {
                "conservation" => d.conservation = parse_bool(key, v)?,
                "conservation_tol" => d.conservation_tol = parse_real(key, v)?,
                "lower_bound" => d.lower_bound = Some(parse_real(key, v)?),
                "upper_bound" => d.upper_bound = Some(parse_real(key, v)?),
                "bounds_tol" => d.bounds_tol = parse_real(key, v)?,
                "monotonicity" => {
                    let words: Vec<&str> = v.split_whitespace().collect();
                    let [f, dir] = words.as_slice() else {
                        return Err(decl_err(key, "expected `<max|min|sum> <non-increasing|non-decreasing>`"));
                    };
                    let functional = serde_json::from_value(serde_json::Value::String(f.to_ascii_lowercase()))
                        .map_err(|_| decl_err(key, format!("unknown functional `{f}`")))?;
                    let direction = serde_json::from_value(serde_json::Value::String(dir.to_ascii_lowercase()))
                        .map_err(|_| decl_err(key, format!("unknown direction `{dir}`")))?;
                    d.monotonicity = Some(MonotoneDecl { functional, direction });
                }
                "monotonicity_tol" => d.monotonicity_tol = parse_real(key, v)?,
                "symmetry_axis" => {
                    d.symmetry_axis = Some(v.trim().parse().map_err(|_| decl_err(key, format!("`{v}` is not an axis index")))?)
                }
                "symmetry_tol" => d.symmetry_tol = parse_real(key, v)?,
                "entropy" => {
                    d.entropy = match v.trim() {
                        "square" => true,
                        other => parse_bool(key, other).map_err(|_| decl_err(key, "only the `square` entropy is supported"))?,
                    }
                }
                "entropy_tol" => d.entropy_tol = parse_real(key, v)?,
                other => return Err(decl_err(other, "unknown invariant")),
            }
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checks: Vec<CheckResult>,
    pub overall: CheckStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn from_checks(checks: Vec<CheckResult>, notes: Vec<String>) -> Self {
        let overall = if checks.iter().any(CheckResult::flagged) { CheckStatus::Flag } else { CheckStatus::Pass };
        AuditReport { checks, overall, notes }
    }

    pub fn passed(&self) -> bool {
        self.overall == CheckStatus::Pass
    }

    pub fn check(&self, id: CheckId) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }
}

/// Optional residual check: the archetype's evaluator and the tolerance.
pub struct ResidualRequest<'a> {
    pub evaluator: &'a dyn ResidualEvaluator,
    pub tolerance: f64,
}

/// Runs every declared check in the fixed order finite, conservation,
/// bounds, monotonicity, symmetry, entropy, residual.
pub fn audit_solution(
    series: &SolutionSeries,
    decl: &Declarations,
    residual: Option<ResidualRequest<'_>>,
) -> Result<AuditReport, AuditError> {
    if decl.is_empty() && residual.is_none() {
        return Ok(AuditReport::from_checks(Vec::new(), vec!["no invariants declared".into()]));
    }
    let mut checks = vec![check_finite(series)];
    if decl.conservation {
        checks.push(check_conservation(series, None, decl.conservation_tol)?);
    }
    if decl.lower_bound.is_some() || decl.upper_bound.is_some() {
        checks.push(check_bounds_series(series, decl.lower_bound, decl.upper_bound, decl.bounds_tol)?);
    }
    if let Some(m) = decl.monotonicity {
        checks.push(check_monotonicity(series, m.functional, m.direction, decl.monotonicity_tol));
    }
    if let Some(axis) = decl.symmetry_axis {
        checks.push(check_symmetry_series(series, axis, decl.symmetry_tol)?);
    }
    if decl.entropy {
        checks.push(check_entropy(series, decl.entropy_tol));
    }
    if let Some(r) = residual {
        checks.push(check_residual(series, r.evaluator, r.tolerance)?);
    }
    Ok(AuditReport::from_checks(checks, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opgraph::{SchemeDescriptor, TimeScheme};
    use crate::solvers::{solve_heat_1d, HeatBc};
    use crate::specmd::parse_spec;
    use std::f64::consts::PI;

    const HEAT_PERIODIC: &str = include_str!("../../data/specs/heat_periodic.md");

    fn periodic_run(ts: TimeScheme) -> SolutionSeries {
        let h = 0.01;
        let scheme = SchemeDescriptor { dt: Some(0.4 * h * h), h: Some(h), ..SchemeDescriptor::new(ts) };
        let ic = |x: f64| (-100.0 * (x - 0.5) * (x - 0.5)).exp();
        solve_heat_1d(&ic, HeatBc::Periodic, 1.0, 1.0, &scheme, 1000.0 * 0.4 * h * h).unwrap().series
    }

    #[test]
    fn declarations_from_the_invariants_section() {
        let d = Declarations::from_spec(&parse_spec(HEAT_PERIODIC.as_bytes()).unwrap()).unwrap();
        assert!(d.conservation);
        assert_eq!(d.lower_bound, Some(0.0));
        assert_eq!(d.monotonicity, Some(MonotoneDecl { functional: Functional::Max, direction: Direction::NonIncreasing }));
        assert_eq!(d.symmetry_axis, None);
        let bad = format!("{HEAT_PERIODIC}symmetry_axis: left\n");
        assert!(Declarations::from_spec(&parse_spec(bad.as_bytes()).unwrap()).is_err());
    }

    #[test]
    fn clean_periodic_heat_run_passes_every_declared_check() {
        // A Gaussian centred in a periodic cell of the grid mirror x_i -> x_{n-1-i}
        // is not symmetric about the grid midpoint, so symmetry is left out.
        let decl = Declarations {
            conservation: true,
            lower_bound: Some(0.0),
            monotonicity: Some(MonotoneDecl { functional: Functional::Max, direction: Direction::NonIncreasing }),
            ..Declarations::default()
        };
        for ts in [TimeScheme::FtcsExplicit, TimeScheme::ImplicitEuler] {
            let report = audit_solution(&periodic_run(ts), &decl, None).unwrap();
            assert!(report.passed(), "{ts}: {report:#?}");
            assert!(report.checks.len() >= 4);
            assert!(report.check(CheckId::Conservation).unwrap().measured < 1e-12);
        }
    }

    #[test]
    fn symmetric_dirichlet_run_is_symmetric() {
        let h = 0.02;
        let scheme = SchemeDescriptor { dt: Some(0.4 * h * h), h: Some(h), ..SchemeDescriptor::new(TimeScheme::FtcsExplicit) };
        let ic = |x: f64| (PI * x).sin() + 0.3 * (3.0 * PI * x).sin();
        let run = solve_heat_1d(&ic, HeatBc::Dirichlet { left: 0.0, right: 0.0 }, 1.0, 1.0, &scheme, 0.05).unwrap();
        let decl = Declarations { symmetry_axis: Some(0), ..Declarations::default() };
        let report = audit_solution(&run.series, &decl, None).unwrap();
        assert!(report.passed(), "{report:#?}");
    }

    #[test]
    fn crank_nicolson_overshoot_is_flagged() {
        let h = 0.01;
        let scheme = SchemeDescriptor { dt: Some(0.05), h: Some(h), ..SchemeDescriptor::new(TimeScheme::CrankNicolson) };
        let step = |x: f64| if (0.4..0.6).contains(&x) { 1.0 } else { 0.0 };
        let run = solve_heat_1d(&step, HeatBc::Dirichlet { left: 0.0, right: 0.0 }, 1.0, 1.0, &scheme, 0.5).unwrap();
        let decl = Declarations {
            lower_bound: Some(0.0),
            monotonicity: Some(MonotoneDecl { functional: Functional::Max, direction: Direction::NonIncreasing }),
            ..Declarations::default()
        };
        let report = audit_solution(&run.series, &decl, None).unwrap();
        assert!(!report.passed());
        assert!(report.check(CheckId::Bounds).unwrap().flagged());
    }

    #[test]
    fn nothing_declared_gives_an_empty_passing_report() {
        let report = audit_solution(&periodic_run(TimeScheme::FtcsExplicit), &Declarations::default(), None).unwrap();
        assert!(report.checks.is_empty() && report.passed());
        assert_eq!(report.notes, vec!["no invariants declared".to_string()]);
    }

    #[test]
    fn non_finite_values_flag_the_report() {
        let f = SolutionField::new(vec![3], vec![1.0], vec![0.0, f64::NAN, 0.0]).unwrap();
        let decl = Declarations { lower_bound: Some(0.0), ..Declarations::default() };
        let report = audit_solution(&SolutionSeries::single(f), &decl, None).unwrap();
        assert!(report.check(CheckId::Finite).unwrap().flagged());
        assert!(!report.passed());
    }

    #[test]
    fn audit_is_deterministic_and_does_not_mutate() {
        let s = periodic_run(TimeScheme::FtcsExplicit);
        let copy = s.clone();
        let decl = Declarations { conservation: true, entropy: true, ..Declarations::default() };
        let a = audit_solution(&s, &decl, None).unwrap();
        let b = audit_solution(&s, &decl, None).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(s, copy);
    }
}
