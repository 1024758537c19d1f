//! Operational run-gates R1–R4.

use serde::{Deserialize, Serialize};

use super::checks::plan_budget;
use super::{GateFinding, GateId, Limits, SCondition, Severity};
use crate::canonical::digest_hex;
use crate::opgraph::Plan;
use crate::specmd::{validate_spec, ProblemSpec, SpecDocument};

/// Evidence gathered outside the judge, e.g. digests of repeated runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeEvidence {
    /// Certificate or output digests of repeated runs with identical inputs.
    #[serde(default)]
    pub run_digests: Vec<String>,
    /// Work actually spent, in the same units as the budget limit.
    #[serde(default)]
    pub actual_work: Option<f64>,
}

fn info(gate: GateId, rule: &str, message: impl Into<String>) -> GateFinding {
    GateFinding::new(gate, rule, Severity::Info, &[], message)
}

/// Digest of the deterministic planning pipeline (budget and cost).
fn dry_run_digest(spec: &ProblemSpec, plan: &Plan) -> Option<String> {
    plan_budget(spec, plan)
        .ok()
        .map(|(_, budget, cost)| digest_hex(&(budget, cost)))
}

/// R1 spec validity, R2 reproducibility, R3 metric integrity and R4 budget
/// compliance.
pub fn run_operational_gates(
    doc: &SpecDocument,
    spec: &ProblemSpec,
    plan: Option<&Plan>,
    limits: &Limits,
    evidence: &RuntimeEvidence,
) -> Vec<GateFinding> {
    let mut out = Vec::new();

    let report = validate_spec(doc);
    out.push(if report.valid {
        info(GateId::R1, "spec-validity", "spec document satisfies the validity rules")
    } else {
        GateFinding::reject(GateId::R1, "spec-validity", SCondition::S1, "spec document violates a validity rule")
    });

    let dry = plan.map(|p| (dry_run_digest(spec, p), dry_run_digest(spec, p)));
    let runs_agree = evidence.run_digests.windows(2).all(|w| w[0] == w[1]);
    out.push(match dry {
        Some((a, b)) if a != b => GateFinding::reject(
            GateId::R2,
            "reproducibility",
            SCondition::S2,
            "two dry runs of the planning pipeline produced different digests",
        ),
        _ if !runs_agree => GateFinding::reject(
            GateId::R2,
            "reproducibility",
            SCondition::S2,
            format!("{} supplied run digests disagree", evidence.run_digests.len()),
        ),
        _ => info(GateId::R2, "reproducibility", "dry-run digests agree"),
    });

    out.push(match spec.tolerance.metric.as_deref() {
        None => info(GateId::R3, "metric-integrity", "no tolerance metric declared"),
        Some(m) if spec.observables.iter().any(|o| o.name.eq_ignore_ascii_case(m)) => {
            info(GateId::R3, "metric-integrity", format!("metric `{m}` is a declared observable"))
        }
        Some(m) => GateFinding::reject(
            GateId::R3,
            "metric-integrity",
            SCondition::S3,
            format!(
                "tolerance metric `{m}` is not among the observables ({})",
                spec.observables.iter().map(|o| o.name.as_str()).collect::<Vec<_>>().join(", ")
            ),
        ),
    });

    let planned = plan.and_then(|p| plan_budget(spec, p).ok()).map(|(_, _, c)| c);
    let over = |w: f64| w > limits.budget_limit || w.is_nan();
    out.push(match (planned, evidence.actual_work) {
        (Some(c), _) if over(c) => GateFinding::reject(
            GateId::R4,
            "budget-compliance",
            SCondition::S4,
            format!("planned work {c:e} exceeds the limit {:e}", limits.budget_limit),
        )
        .with("cost", c),
        (_, Some(w)) if over(w) => GateFinding::reject(
            GateId::R4,
            "budget-compliance",
            SCondition::S4,
            format!("actual work {w:e} exceeds the limit {:e}", limits.budget_limit),
        )
        .with("work", w),
        _ => info(GateId::R4, "budget-compliance", "within budget"),
    });
    out
}
