//! Gates G1 (dimensional), G2 (boundary/initial data), G3 (well-posedness)
//! and G5 (cost).

use std::collections::BTreeMap;

use super::{ArchetypeTemplate, GateFinding, GateId, Limits, PdeClass, SCondition, Severity, StabilityRule};
use crate::opgraph::{estimate_cost, select_resolutions, ErrorBudget, OperatorGraph, Plan, PlanError, TimeScheme};
use crate::specmd::{ConditionKind, ProblemSpec};
use crate::units::{check_template, parse_unit, UnitError};

/// Explicit schemes above this stiffness ratio are rejected.
pub const STIFFNESS_LIMIT: f64 = 1e6;
/// Condition numbers above this are flagged.
pub const CONDITION_LIMIT: f64 = 1e12;

const G1: GateId = GateId::G1Dimensional;
const G2: GateId = GateId::G2BcIc;
const G3: GateId = GateId::G3WellPosedness;
const G5: GateId = GateId::G5Cost;

/// Observable unit text without a trailing range such as `[0, 1]`.
fn observable_unit(text: &str) -> &str {
    text.split('[').next().unwrap_or("").trim()
}

/// Unit template check, parameter signs, and the logarithmic-unit check
/// between tolerance thresholds and the observables they constrain.
pub fn gate_dimensional(spec: &ProblemSpec, template: &ArchetypeTemplate) -> Vec<GateFinding> {
    let mut out = match check_template(spec, template) {
        Ok(f) => f,
        Err(UnitError::MissingParameter(name)) => vec![GateFinding::reject(
            G1,
            "missing-parameter",
            SCondition::S1,
            format!("MissingParameter({name}): the `{}` archetype requires `{name}`", template.id),
        )],
        Err(e) => vec![GateFinding::reject(G1, "template", SCondition::S1, e.to_string())],
    };
    for (name, sign) in &template.signs {
        if let Some(q) = spec.parameter(name) {
            if !sign.admits(q.value) {
                out.push(
                    GateFinding::reject(
                        G1,
                        "non-physical-parameter",
                        SCondition::S1,
                        format!("non-physical parameter: `{name}` = {q} must be {sign:?}").to_lowercase(),
                    )
                    .with(name, q.value),
                );
            }
        }
    }
    for t in &spec.tolerance.thresholds {
        if t.quantity.unit_text.is_empty() {
            continue;
        }
        let lower = t.name.to_lowercase();
        let Some(obs) = spec.observables.iter().find(|o| {
            let n = o.name.to_lowercase();
            lower == n || lower.starts_with(&format!("{n}_"))
        }) else {
            continue;
        };
        let Ok(unit) = parse_unit(observable_unit(&obs.unit_text)) else {
            continue;
        };
        if unit.logarithmic != t.quantity.logarithmic || unit.dimension != t.quantity.dim {
            out.push(GateFinding::reject(
                G1,
                "unit-mismatch",
                SCondition::S1,
                format!(
                    "threshold `{}` is in `{}` but observable `{}` is in `{}`{}",
                    t.name,
                    t.quantity.unit_text,
                    obs.name,
                    obs.unit_text,
                    if unit.logarithmic != t.quantity.logarithmic { " (logarithmic vs linear)" } else { "" }
                ),
            ));
        }
    }
    out
}

/// Initial data for evolution problems, boundary data where the archetype
/// needs it, and consistency of repeated Dirichlet data.
pub fn gate_bc_ic(spec: &ProblemSpec, template: &ArchetypeTemplate) -> Vec<GateFinding> {
    let mut out = Vec::new();
    if (template.requires_ic || template.pde_class.is_evolutionary()) && spec.initial.is_absent() {
        out.push(GateFinding::reject(
            G2,
            "missing-ic",
            SCondition::S2,
            format!("`{}` is an evolution problem but no initial condition is given", template.id),
        ));
    }
    if (template.requires_full_boundary || template.pde_class == PdeClass::Elliptic) && spec.boundary.is_empty() {
        out.push(GateFinding::reject(
            G2,
            "missing-bc",
            SCondition::S2,
            format!("`{}` needs boundary conditions but none are given", template.id),
        ));
    }
    if template.requires_full_boundary || template.pde_class == PdeClass::Elliptic {
        out.extend(unpaired_ends(spec));
    }
    let mut dirichlet: BTreeMap<&str, f64> = BTreeMap::new();
    for c in spec.boundary.iter().filter(|c| c.kind == ConditionKind::Dirichlet) {
        let Some(v) = c.numeric_value() else { continue };
        match dirichlet.get(c.target.as_str()) {
            Some(&prev) if prev != v => out.push(
                GateFinding::reject(
                    G2,
                    "contradictory-bc",
                    SCondition::S2,
                    format!("contradictory BC: Dirichlet data on `{}` is both {prev} and {v}", c.target),
                )
                .with("first", prev)
                .with("second", v),
            ),
            Some(_) => {}
            None => {
                dirichlet.insert(&c.target, v);
            }
        }
    }
    out
}

/// Opposite sides named in boundary targets. Naming one side of a pair
/// without the other leaves that side without data, unless a periodic or
/// whole-boundary condition covers it.
const OPPOSITE_SIDES: [(&str, &str); 3] = [("left", "right"), ("bottom", "top"), ("back", "front")];

fn unpaired_ends(spec: &ProblemSpec) -> Vec<GateFinding> {
    let targets: Vec<String> = spec.boundary.iter().map(|c| c.target.trim().to_ascii_lowercase()).collect();
    let covered = spec.boundary.iter().any(|c| c.kind == ConditionKind::Periodic)
        || targets.iter().any(|t| matches!(t.as_str(), "boundary" | "all" | "ends" | "walls"));
    if covered {
        return Vec::new();
    }
    let has = |side: &str| targets.iter().any(|t| t == side);
    OPPOSITE_SIDES
        .iter()
        .flat_map(|&(a, b)| [(a, b), (b, a)])
        .filter(|&(named, other)| has(named) && !has(other))
        .map(|(named, other)| {
            GateFinding::reject(
                G2,
                "missing-bc",
                SCondition::S2,
                format!("boundary data is given on `{named}` but not on `{other}`"),
            )
        })
        .collect()
}

fn missing_field(name: &str, why: &str) -> GateFinding {
    GateFinding::reject(
        G3,
        "missing-plan-field",
        SCondition::S3,
        format!("MissingPlanField({name}): {why}"),
    )
}

fn parameter_si(spec: &ProblemSpec, name: &str) -> Option<f64> {
    spec.parameter(name).map(|q| q.si_value())
}

/// Named stability and well-posedness rules over the plan's scheme
/// evidence and operator graph.
pub fn gate_wellposedness(spec: &ProblemSpec, template: &ArchetypeTemplate, plan: Option<&Plan>) -> Vec<GateFinding> {
    let Some(plan) = plan else {
        return vec![GateFinding::reject(G3, "missing-plan", SCondition::S3, "no solver plan was supplied")];
    };
    let mut out = Vec::new();

    let unbounded = plan.nodes_without_lipschitz();
    if !unbounded.is_empty() {
        out.push(GateFinding::reject(
            G3,
            "lipschitz",
            SCondition::S2,
            format!("no finite Lipschitz constant for node(s) {}", unbounded.join(", ")),
        ));
    }
    match plan.graph() {
        Ok(_) | Err(PlanError::MissingLipschitz(_)) => {}
        Err(e) => out.push(GateFinding::reject(G3, "operator-graph", SCondition::S3, e.to_string())),
    }

    let Some(scheme) = plan.scheme.as_ref() else {
        if template.stability_rule.is_some() {
            out.push(missing_field(
                "scheme",
                &format!("the `{}` archetype needs a scheme descriptor", template.id),
            ));
        }
        return out;
    };
    let explicit = scheme.time_scheme.is_explicit();
    let dim = spec.domain.dimension.or(plan.dimension).unwrap_or(1).max(1);

    match template.stability_rule {
        Some(StabilityRule::FtcsDiffusion) if scheme.time_scheme == TimeScheme::FtcsExplicit => {
            match (parameter_si(spec, "kappa"), scheme.dt, scheme.h) {
                (Some(kappa), Some(dt), Some(h)) => {
                    let ratio = kappa * dt / (h * h);
                    let limit = 1.0 / (2.0 * dim as f64);
                    let f = if ratio > limit {
                        GateFinding::reject(
                            G3,
                            "ftcs-diffusion",
                            SCondition::S3,
                            format!("explicit diffusion number kappa*dt/h^2 = {ratio} exceeds 1/(2*{dim}) = {limit}"),
                        )
                    } else {
                        GateFinding::new(G3, "ftcs-diffusion", Severity::Info, &[], format!("kappa*dt/h^2 = {ratio} <= {limit}"))
                    };
                    out.push(f.with("ratio", ratio).with("limit", limit));
                }
                (None, _, _) => out.push(missing_field("kappa", "the diffusion bound needs kappa")),
                (_, None, _) => out.push(missing_field("dt", "the diffusion bound needs dt")),
                (_, _, None) => out.push(missing_field("h", "the diffusion bound needs h")),
            }
        }
        Some(StabilityRule::AdvectiveCfl) if explicit => {
            let speed = scheme.wave_speed.or_else(|| {
                (template.pde_class != PdeClass::ConservationLaw)
                    .then(|| parameter_si(spec, "c"))
                    .flatten()
            });
            match (speed, scheme.dt, scheme.h) {
                (Some(c), Some(dt), Some(h)) => {
                    let courant = c.abs() * dt / h;
                    let f = if courant > 1.0 {
                        GateFinding::reject(
                            G3,
                            "advective-cfl",
                            SCondition::S3,
                            format!("CFL number |c|*dt/h = {courant} exceeds 1"),
                        )
                    } else {
                        GateFinding::new(G3, "advective-cfl", Severity::Info, &[], format!("CFL number {courant} <= 1"))
                    };
                    out.push(f.with("courant", courant).with("limit", 1.0));
                }
                (None, _, _) => out.push(missing_field("wave_speed", "the CFL bound needs a signal speed")),
                (_, None, _) => out.push(missing_field("dt", "the CFL bound needs dt")),
                (_, _, None) => out.push(missing_field("h", "the CFL bound needs h")),
            }
        }
        Some(StabilityRule::Stiffness) if explicit && scheme.stiffness_ratio.is_none() => {
            out.push(missing_field(
                "stiffness_ratio",
                "an explicit scheme for a stiff archetype needs stiffness evidence",
            ));
        }
        _ => {}
    }

    if let Some(ratio) = scheme.stiffness_ratio {
        if explicit && ratio > STIFFNESS_LIMIT {
            out.push(
                GateFinding::reject(
                    G3,
                    "stiffness",
                    SCondition::S3,
                    format!(
                        "explicit scheme `{}` with stiffness ratio {ratio:e} > {STIFFNESS_LIMIT:e}",
                        scheme.time_scheme
                    ),
                )
                .with("stiffness_ratio", ratio)
                .with("limit", STIFFNESS_LIMIT),
            );
        }
    }
    if let Some(cond) = scheme.condition_number {
        if cond > CONDITION_LIMIT {
            out.push(
                GateFinding::new(
                    G3,
                    "conditioning",
                    Severity::Flag,
                    &[SCondition::S4],
                    format!("condition number {cond:e} > {CONDITION_LIMIT:e}: accuracy of the linear solve is not assured"),
                )
                .with("condition_number", cond)
                .with("limit", CONDITION_LIMIT),
            );
        }
    }
    if template.pde_class == PdeClass::Elliptic || template.stability_rule == Some(StabilityRule::Coercivity) {
        match scheme.coercivity_constant {
            None => out.push(missing_field("coercivity_constant", "elliptic problems need a coercivity constant")),
            Some(a) if a <= 0.0 || !a.is_finite() => out.push(
                GateFinding::reject(
                    G3,
                    "coercivity",
                    SCondition::S2,
                    format!("coercivity constant {a} is not positive"),
                )
                .with("coercivity_constant", a),
            ),
            Some(_) => {}
        }
    }
    out
}

/// Error budget and work estimate for a plan against the problem tolerance.
pub fn plan_budget(spec: &ProblemSpec, plan: &Plan) -> Result<(OperatorGraph, ErrorBudget, f64), String> {
    let g = plan.graph().map_err(|e| e.to_string())?;
    let target = spec.tolerance.epsilon().quantity.si_value();
    let budget = select_resolutions(&g, target).map_err(|e| e.to_string())?;
    let dim = plan.dimension.or(spec.domain.dimension).unwrap_or(1);
    let cost = estimate_cost(&budget, &g, dim);
    Ok((g, budget, cost))
}

/// Rejects on S4 when the work estimate exceeds the limit; a cost equal to
/// the limit passes.
pub fn gate_cost(budget: &ErrorBudget, g: &OperatorGraph, dim: u32, budget_limit: f64) -> Vec<GateFinding> {
    let cost = estimate_cost(budget, g, dim);
    let f = if cost > budget_limit || cost.is_nan() {
        GateFinding::reject(
            G5,
            "budget",
            SCondition::S4,
            format!("estimated work {cost:e} exceeds the limit {budget_limit:e}"),
        )
    } else {
        GateFinding::new(G5, "budget", Severity::Info, &[], format!("estimated work {cost:e} within {budget_limit:e}"))
    };
    vec![f.with("cost", cost).with("limit", budget_limit)]
}

/// [`gate_cost`] for a plan file, with dimension taken from the plan or the
/// spec domain.
pub fn gate_cost_for_plan(spec: &ProblemSpec, plan: &Plan, limits: &Limits) -> Vec<GateFinding> {
    match plan_budget(spec, plan) {
        Ok((g, budget, _)) => {
            let dim = plan.dimension.or(spec.domain.dimension).unwrap_or(1);
            gate_cost(&budget, &g, dim, limits.budget_limit)
        }
        Err(e) => vec![GateFinding::new(G5, "budget", Severity::Info, &[], format!("cost not estimated: {e}"))],
    }
}
