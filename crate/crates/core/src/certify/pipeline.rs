//! Spec and plan in, certificate out: parse, judge, solve with the built-in
//! solver for the archetype, audit, probe, seal.
//!
//! Each stage can be switched off. With the gates off the executor runs
//! whatever the plan says and fills gaps the gates would have rejected
//! (missing initial or boundary data become zero, conflicting data take
//! the first value). That unchecked mode is what the funnel experiment
//! measures.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{emit_certificate, expr, Certificate, CertificateInputs, CertifyError};
use crate::audit::{audit_solution, evaluator_for, AuditError, AuditReport, Declarations, ResidualContext, ResidualRequest};
use crate::audit::{SolutionField, SolutionSeries};
use crate::canonical::sha256_hex;
use crate::gates::{gate_classification, judge_pre, plan_budget, JudgeVerdict, Limits, Outcome};
use crate::opgraph::{ErrorBudget, Plan, SchemeDescriptor, TimeScheme};
use crate::probes::{run_probes, HeatInterior, ParametricProblem, Pitchfork, ProbeError, ProbeReport, ProbeSelection};
use crate::solvers::{
    pitchfork_max_dt, solve_burgers_central, solve_burgers_lf, solve_heat_1d, solve_pitchfork, solve_poisson_2d,
    solve_stiff_linear, HeatBc, SolverError,
};
use crate::specmd::{extract_six_tuple, parse_spec, ConditionKind, InitialConditions, ProblemSpec, SpecDocument};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("spec does not parse: {0}")]
    Parse(String),
    #[error("spec content not usable: {0}")]
    Spec(String),
    #[error("bad expression {0}")]
    Expression(String),
    #[error("missing input: {0}")]
    Missing(String),
    #[error("no built-in solver for {0}")]
    Unsupported(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Certify(#[from] CertifyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stages {
    pub gates: bool,
    pub audit: bool,
    pub probes: bool,
}

impl Stages {
    pub const ALL: Stages = Stages { gates: true, audit: true, probes: true };
    pub const NONE: Stages = Stages { gates: false, audit: false, probes: false };
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub stages: Stages,
    pub limits: Limits,
    pub seed: u64,
    pub probes: ProbeSelection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { stages: Stages::ALL, limits: Limits::default(), seed: 0, probes: ProbeSelection::default() }
    }
}

/// The concrete problem the executor solved.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "solver", rename_all = "kebab-case")]
pub enum Solved {
    Heat { kappa: f64, scheme: TimeScheme, periodic: bool, length: f64, dt: f64, h: f64, t_end: f64 },
    Poisson { n: usize, boundary_value: f64 },
    StiffLinear { lambda_fast: f64, lambda_slow: f64, scheme: TimeScheme, dt: f64, t_end: f64 },
    Burgers { scheme: TimeScheme, length: f64, dt: f64, h: f64, t_end: f64 },
    Pitchfork { theta: f64, x0: f64, dt: f64, t_end: f64 },
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub archetype: String,
    pub solved: Solved,
    pub series: SolutionSeries,
    /// Inputs for the residual evaluator, when the archetype has one.
    pub residual: Option<ResidualContext>,
    /// Gaps filled by the executor.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub verdict: JudgeVerdict,
    pub plan_index: Option<usize>,
    pub execution: Option<Execution>,
    pub budget: Option<ErrorBudget>,
    pub audit: Option<AuditReport>,
    pub probes: Vec<ProbeReport>,
    pub certificate: Certificate,
}

fn scheme(plan: Option<&Plan>) -> Result<&SchemeDescriptor, PipelineError> {
    plan.and_then(|p| p.scheme.as_ref()).ok_or_else(|| PipelineError::Missing("plan scheme".into()))
}

fn need(v: Option<f64>, what: &str) -> Result<f64, PipelineError> {
    v.ok_or_else(|| PipelineError::Missing(format!("plan scheme {what}")))
}

fn param(spec: &ProblemSpec, name: &str) -> Result<f64, PipelineError> {
    spec.parameter(name)
        .map(|q| q.si_value())
        .ok_or_else(|| PipelineError::Missing(format!("parameter `{name}`")))
}

fn interval(spec: &ProblemSpec) -> Option<(f64, f64)> {
    spec.domain.extents.as_deref().and_then(expr::interval)
}

/// Evolution horizon: the `t_end` parameter, else the end of a time
/// interval domain.
fn horizon(spec: &ProblemSpec, time_domain: bool) -> Result<f64, PipelineError> {
    if let Some(q) = spec.parameter("t_end") {
        return Ok(q.si_value());
    }
    match interval(spec) {
        Some((a, b)) if time_domain => Ok(b - a),
        _ => Err(PipelineError::Missing("parameter `t_end`".into())),
    }
}

fn initial_text<'a>(spec: &'a ProblemSpec, notes: &mut Vec<String>) -> Option<&'a str> {
    match &spec.initial {
        InitialConditions::Given(c) if !c.is_empty() => Some(c[0].expression.as_str()),
        _ => {
            notes.push("initial data missing: zero used".into());
            None
        }
    }
}

/// First numeric Dirichlet value for a target, if any.
fn dirichlet(spec: &ProblemSpec, target: Option<&str>) -> Option<f64> {
    spec.boundary
        .iter()
        .filter(|c| c.kind == ConditionKind::Dirichlet && target.is_none_or(|t| c.target == t))
        .find_map(|c| c.numeric_value())
}

fn note_conflicts(spec: &ProblemSpec, notes: &mut Vec<String>) {
    let mut seen: Vec<(&str, f64)> = Vec::new();
    for c in spec.boundary.iter().filter(|c| c.kind == ConditionKind::Dirichlet) {
        if let Some(v) = c.numeric_value() {
            if seen.iter().any(|(t, w)| *t == c.target && *w != v) {
                notes.push(format!("conflicting data on `{}`: first value used", c.target));
            }
            seen.push((&c.target, v));
        }
    }
}

fn boundary_value(spec: &ProblemSpec, target: Option<&str>, notes: &mut Vec<String>) -> Result<f64, PipelineError> {
    if let Some(t) = target {
        // Data named for this end must be usable as is; never borrow another end's.
        if let Some(c) = spec.boundary.iter().find(|c| c.target == t) {
            return match (c.kind, c.numeric_value()) {
                (ConditionKind::Dirichlet, Some(v)) => Ok(v),
                (ConditionKind::Dirichlet, None) => Err(PipelineError::Unsupported(format!("non-constant Dirichlet data on `{t}`"))),
                (kind, _) => Err(PipelineError::Unsupported(format!("{} data on `{t}`", kind.name()))),
            };
        }
    }
    Ok(dirichlet(spec, target).or_else(|| dirichlet(spec, None)).unwrap_or_else(|| {
        notes.push(format!("boundary data for `{}` missing: zero used", target.unwrap_or("boundary")));
        0.0
    }))
}

/// Source term: a `forcing` setting, or an equation entry named `forcing`,
/// `source` or `f`.
fn forcing_text(spec: &ProblemSpec) -> Option<&str> {
    spec.setting("forcing").or_else(|| {
        spec.equations
            .iter()
            .find(|e| matches!(e.name.as_str(), "forcing" | "source" | "f"))
            .map(|e| e.expression.as_str())
    })
}

fn is_pitchfork(spec: &ProblemSpec) -> bool {
    spec.parameter("theta").is_some() && spec.equation_text().replace(' ', "").contains("x^3")
}

/// Runs the built-in solver for an archetype with the plan's scheme.
pub fn execute(spec: &ProblemSpec, archetype: &str, plan: Option<&Plan>) -> Result<Execution, PipelineError> {
    let mut notes = Vec::new();
    note_conflicts(spec, &mut notes);
    let (solved, series, residual) = match archetype {
        "heat" => {
            if spec.domain.dimension.is_some_and(|d| d != 1) {
                return Err(PipelineError::Unsupported("heat in more than one dimension".into()));
            }
            let sd = scheme(plan)?;
            let (dt, h) = (need(sd.dt, "dt")?, need(sd.h, "h")?);
            let (a, b) = interval(spec).ok_or_else(|| PipelineError::Missing("domain extent".into()))?;
            let kappa = param(spec, "kappa")?;
            let t_end = horizon(spec, false)?;
            let periodic = spec.boundary.iter().any(|c| c.kind == ConditionKind::Periodic);
            let bc = if periodic {
                HeatBc::Periodic
            } else {
                HeatBc::Dirichlet {
                    left: boundary_value(spec, Some("left"), &mut notes)?,
                    right: boundary_value(spec, Some("right"), &mut notes)?,
                }
            };
            let ic: Box<dyn Fn(f64) -> f64> = match initial_text(spec, &mut notes) {
                Some(t) => {
                    let f = expr::function_1d(t)?;
                    Box::new(move |x| f(x + a))
                }
                None => Box::new(|_| 0.0),
            };
            let run = solve_heat_1d(&ic, bc, kappa, b - a, sd, t_end)?;
            if run.diverged {
                notes.push("series ended on a non-finite frame".into());
            }
            let ctx = ResidualContext { forcing: None, kappa: Some(kappa), scheme: Some(sd.time_scheme), periodic };
            let solved = Solved::Heat { kappa, scheme: sd.time_scheme, periodic, length: b - a, dt, h, t_end };
            (solved, run.series, Some(ctx))
        }
        "poisson" => {
            let n = match plan.and_then(|p| p.scheme.as_ref()).and_then(|s| s.h) {
                Some(h) => {
                    let n = (1.0 / h).round() as usize;
                    if ((n as f64) * h - 1.0).abs() > 1e-9 {
                        return Err(PipelineError::Spec(format!("h = {h} does not divide the unit square")));
                    }
                    n
                }
                None => *spec.domain.grid.first().ok_or_else(|| PipelineError::Missing("grid size".into()))?,
            };
            let g = boundary_value(spec, None, &mut notes)?;
            let text = forcing_text(spec).unwrap_or_else(|| {
                notes.push("forcing missing: zero used".into());
                "0"
            });
            let f = expr::function_2d(text)?;
            let sol = solve_poisson_2d(&f, &|_, _| g, n)?;
            let h = 1.0 / n as f64;
            let m = n + 1;
            let forcing = (0..m * m).map(|k| f((k / m) as f64 * h, (k % m) as f64 * h)).collect();
            let ctx = ResidualContext { forcing: Some(forcing), kappa: None, scheme: None, periodic: false };
            (Solved::Poisson { n, boundary_value: g }, SolutionSeries::single(sol.field), Some(ctx))
        }
        "stiff-ode" => {
            let sd = scheme(plan)?;
            let dt = need(sd.dt, "dt")?;
            let (lf, ls) = (param(spec, "lambda_fast")?, param(spec, "lambda_slow")?);
            let t_end = horizon(spec, true)?;
            let x0 = match initial_text(spec, &mut notes) {
                Some(t) => match expr::values(t)?.as_slice() {
                    &[a, b] => [a, b],
                    other => return Err(PipelineError::Spec(format!("stiff system needs 2 initial values, got {}", other.len()))),
                },
                None => [0.0, 0.0],
            };
            let run = solve_stiff_linear(lf, ls, x0, sd.time_scheme, dt, t_end)?;
            if run.diverged {
                notes.push("series ended on a non-finite frame".into());
            }
            let solved = Solved::StiffLinear { lambda_fast: lf, lambda_slow: ls, scheme: sd.time_scheme, dt, t_end };
            (solved, run.series, None)
        }
        "scalar-conservation-law" => {
            let sd = scheme(plan)?;
            let (dt, h) = (need(sd.dt, "dt")?, need(sd.h, "h")?);
            let (a, b) = interval(spec).ok_or_else(|| PipelineError::Missing("domain extent".into()))?;
            let t_end = horizon(spec, false)?;
            let ic: Box<dyn Fn(f64) -> f64> = match initial_text(spec, &mut notes) {
                Some(t) => {
                    let f = expr::function_1d(t)?;
                    Box::new(move |x| f(x + a))
                }
                None => Box::new(|_| 0.0),
            };
            let series = match sd.time_scheme {
                TimeScheme::LaxFriedrichs => solve_burgers_lf(&ic, b - a, h, dt, t_end)?,
                TimeScheme::FtcsExplicit => solve_burgers_central(&ic, b - a, h, dt, t_end)?,
                other => return Err(PipelineError::Unsupported(format!("conservation law with `{other}`"))),
            };
            (Solved::Burgers { scheme: sd.time_scheme, length: b - a, dt, h, t_end }, series, None)
        }
        "generic-ode" if is_pitchfork(spec) => {
            let sd = scheme(plan)?;
            let dt = need(sd.dt, "dt")?;
            let theta = param(spec, "theta")?;
            let t_end = horizon(spec, true)?;
            let x0 = match initial_text(spec, &mut notes) {
                Some(t) => *expr::values(t)?.first().ok_or_else(|| PipelineError::Spec("empty initial value".into()))?,
                None => 0.0,
            };
            let x = solve_pitchfork(theta, x0, dt, t_end)?;
            let field = SolutionField::new(vec![1], vec![1.0], vec![x]).expect("scalar field");
            (Solved::Pitchfork { theta, x0, dt, t_end }, SolutionSeries::single(field), None)
        }
        other => return Err(PipelineError::Unsupported(format!("archetype `{other}`"))),
    };
    Ok(Execution { archetype: archetype.to_string(), solved, series, residual, notes })
}

/// Residual inputs for an externally computed solution on a grid of
/// `shape`, or `None` when the archetype has no evaluator.
pub fn residual_context_for(
    spec: &ProblemSpec,
    archetype: &str,
    plan: Option<&Plan>,
    shape: &[usize],
) -> Result<Option<ResidualContext>, PipelineError> {
    match archetype {
        "heat" => {
            let sd = scheme(plan)?;
            let periodic = spec.boundary.iter().any(|c| c.kind == ConditionKind::Periodic);
            Ok(Some(ResidualContext { forcing: None, kappa: Some(param(spec, "kappa")?), scheme: Some(sd.time_scheme), periodic }))
        }
        "poisson" => {
            let &[m, m2] = shape else {
                return Err(PipelineError::Spec(format!("poisson solution must be 2-D, got shape {shape:?}")));
            };
            if m != m2 || m < 4 {
                return Err(PipelineError::Spec(format!("poisson solution must be square, got shape {shape:?}")));
            }
            let f = expr::function_2d(forcing_text(spec).unwrap_or("0"))?;
            let h = 1.0 / (m - 1) as f64;
            let forcing = (0..m * m).map(|k| f((k / m) as f64 * h, (k % m) as f64 * h)).collect();
            Ok(Some(ResidualContext { forcing: Some(forcing), kappa: None, scheme: None, periodic: false }))
        }
        _ => Ok(None),
    }
}

/// Parametric surrogate the probes run on. Heat problems use a coarse
/// 16-cell rod with the problem's diffusivity and horizon; the pitchfork is
/// re-integrated from the problem data.
pub fn probe_problem_for(exec: &Execution) -> Option<Box<dyn ParametricProblem>> {
    match exec.solved {
        Solved::Heat { kappa, t_end, .. } => Some(Box::new(HeatInterior { t_end, ..HeatInterior::new(kappa) })),
        Solved::Pitchfork { theta, x0, t_end, .. } => {
            let dt = Pitchfork::new(theta).dt.min(pitchfork_max_dt(theta));
            Some(Box::new(Pitchfork { theta, x0, dt, t_end }))
        }
        _ => None,
    }
}

fn unchecked_verdict(spec: &ProblemSpec) -> JudgeVerdict {
    let (template, _) = gate_classification(spec);
    JudgeVerdict { outcome: Outcome::Accept, findings: Vec::new(), rounds_used: 0, rejected_condition: None, archetype: Some(template.id) }
}

fn parse(spec_bytes: &[u8]) -> Result<SpecDocument, PipelineError> {
    parse_spec(spec_bytes).map_err(|e| PipelineError::Parse(e.to_string()))
}

/// Full pipeline. A rejected verdict ends the run with a rejection
/// certificate; otherwise the plan of the accepted round is executed.
pub fn run_pipeline(spec_bytes: &[u8], plans: &[Plan], cfg: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    let doc = parse(spec_bytes)?;
    let spec_digest = sha256_hex(spec_bytes);
    let verdict = if cfg.stages.gates {
        judge_pre(&doc, plans, &cfg.limits)
    } else {
        let spec = extract_six_tuple(&doc).map_err(|e| PipelineError::Spec(e.to_string()))?;
        unchecked_verdict(&spec)
    };
    if verdict.outcome != Outcome::Accept {
        let plan_index = plans.get(verdict.rounds_used as usize).map(|_| verdict.rounds_used as usize);
        let plan_digest = plan_index.map(|i| plans[i].digest());
        let certificate = emit_certificate(CertificateInputs {
            spec_digest: &spec_digest,
            plan_digest: plan_digest.as_deref(),
            verdict: &verdict,
            budget: None,
            audit: None,
            probes: &[],
            bound_b: None,
            tolerance_eps: None,
            gaps: &[],
        })?;
        return Ok(PipelineRun { verdict, plan_index, execution: None, budget: None, audit: None, probes: Vec::new(), certificate });
    }

    let spec = extract_six_tuple(&doc).map_err(|e| PipelineError::Spec(e.to_string()))?;
    let archetype = verdict.archetype.clone().unwrap_or_default();
    let plan_index = plans.get(verdict.rounds_used as usize).map(|_| verdict.rounds_used as usize);
    let plan = plan_index.map(|i| &plans[i]);
    let eps = spec.tolerance.epsilon().quantity.si_value();
    let exec = execute(&spec, &archetype, plan)?;
    let budget = plan.and_then(|p| plan_budget(&spec, p).ok()).map(|(_, b, _)| b);

    let mut audit = None;
    let mut bound_b = None;
    if cfg.stages.audit {
        let decl = Declarations::from_spec(&doc)?;
        let evaluator = exec.residual.as_ref().map(|ctx| evaluator_for(&archetype, ctx)).transpose()?;
        let request = evaluator.as_deref().map(|e| ResidualRequest { evaluator: e, tolerance: eps });
        let report = audit_solution(&exec.series, &decl, request)?;
        bound_b = report.checks.iter().find(|c| c.id == crate::audit::CheckId::Residual).map(|c| c.measured);
        audit = Some(report);
    }
    let probes = match (cfg.stages.probes, probe_problem_for(&exec)) {
        (true, Some(p)) => run_probes(p.as_ref(), &cfg.probes.with_seed(cfg.seed))?,
        _ => Vec::new(),
    };
    let plan_digest = plan.map(Plan::digest);
    let certificate = emit_certificate(CertificateInputs {
        spec_digest: &spec_digest,
        plan_digest: plan_digest.as_deref(),
        verdict: &verdict,
        budget: budget.as_ref(),
        audit: audit.as_ref(),
        probes: &probes,
        bound_b,
        tolerance_eps: Some(eps),
        // Unchecked runs fill gaps by design; checked runs must not need to.
        gaps: if cfg.stages.gates { &exec.notes } else { &[] },
    })?;
    Ok(PipelineRun { verdict, plan_index, execution: Some(exec), budget, audit, probes, certificate })
}
