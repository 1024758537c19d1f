//! Pre-execution gates G1–G5, the operational run-gates R1–R4 and the
//! accept / redesign / reject verdict.
//!
//! Gate-to-condition mapping used throughout:
//!
//! | gate | rule | condition |
//! |------|------|-----------|
//! | G1 dimensional | unit template, parameter signs, log-unit mismatch | S1 |
//! | G2 bc/ic | missing IC, missing BC, contradictory Dirichlet data | S2 |
//! | G3 well-posedness | coercivity, Lipschitz | S2 |
//! | G3 well-posedness | FTCS diffusion bound, advective CFL, stiffness, graph validity | S3 |
//! | G3 well-posedness | conditioning (flag only) | S4 |
//! | G4 classification | unknown archetype | S1 |
//! | G5 cost | work estimate over limit | S4 |
//! | R1..R4 | validity, reproducibility, metric integrity, budget | S1..S4 |

mod archetype;
mod checks;
mod run;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::opgraph::Plan;
use crate::specmd::{extract_six_tuple, validate_spec, ProblemSpec, SpecDocument};

pub use archetype::{builtin_templates, gate_classification, template_by_id, ArchetypeTemplate, PdeClass, Sign, StabilityRule};
pub use checks::{
    gate_bc_ic, gate_cost, gate_cost_for_plan, gate_dimensional, gate_wellposedness, plan_budget, CONDITION_LIMIT, STIFFNESS_LIMIT,
};
pub use run::{run_operational_gates, RuntimeEvidence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GateId {
    #[serde(rename = "G1-dimensional")]
    G1Dimensional,
    #[serde(rename = "G2-bcic")]
    G2BcIc,
    #[serde(rename = "G3-wellposedness")]
    G3WellPosedness,
    #[serde(rename = "G4-classification")]
    G4Classification,
    #[serde(rename = "G5-cost")]
    G5Cost,
    R1,
    R2,
    R3,
    R4,
}

impl GateId {
    pub fn is_pre_gate(self) -> bool {
        self <= GateId::G5Cost
    }
}

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string tag"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SCondition {
    S1,
    S2,
    S3,
    S4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Flag,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateFinding {
    pub gate: GateId,
    /// Short rule name from the gate catalog, e.g. `stiffness`.
    pub rule: String,
    pub s_conditions: Vec<SCondition>,
    pub severity: Severity,
    pub message: String,
    pub evidence: BTreeMap<String, f64>,
}

impl GateFinding {
    pub fn new(gate: GateId, rule: &str, severity: Severity, conditions: &[SCondition], message: impl Into<String>) -> Self {
        GateFinding {
            gate,
            rule: rule.to_string(),
            s_conditions: conditions.to_vec(),
            severity,
            message: message.into(),
            evidence: BTreeMap::new(),
        }
    }

    pub fn reject(gate: GateId, rule: &str, condition: SCondition, message: impl Into<String>) -> Self {
        Self::new(gate, rule, Severity::Reject, &[condition], message)
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.evidence.insert(name.to_string(), value);
        self
    }

    pub fn is_reject(&self) -> bool {
        self.severity == Severity::Reject
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Accept,
    Redesign,
    Reject,
}

/// Upper bound on redesign rounds.
pub const MAX_ROUNDS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub outcome: Outcome,
    /// Findings of the last judged round.
    pub findings: Vec<GateFinding>,
    pub rounds_used: u32,
    pub rejected_condition: Option<SCondition>,
    /// Archetype selected by the classification gate, when a spec was readable.
    pub archetype: Option<String>,
}

impl JudgeVerdict {
    pub fn has_flags(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Flag)
    }

    pub fn rejects(&self) -> impl Iterator<Item = &GateFinding> {
        self.findings.iter().filter(|f| f.is_reject())
    }

    /// Whether a gate produced a reject or flag finding.
    pub fn caught_by(&self, gate: GateId) -> bool {
        self.findings
            .iter()
            .any(|f| f.gate == gate && f.severity >= Severity::Flag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    /// Largest admissible work estimate; equality passes.
    pub budget_limit: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { budget_limit: 1e9 }
    }
}

/// First violated condition in the order S1, S2, S3, S4.
fn first_condition(findings: &[GateFinding]) -> Option<SCondition> {
    findings
        .iter()
        .filter(|f| f.is_reject())
        .flat_map(|f| f.s_conditions.iter().copied())
        .min()
}

/// Runs every gate for one plan. Classification runs first because the
/// dimensional and boundary gates need its template, but findings are
/// returned in fixed gate order G1..G5, R1..R4.
pub fn judge_round(
    doc: &SpecDocument,
    spec: &ProblemSpec,
    plan: Option<&Plan>,
    limits: &Limits,
    evidence: &RuntimeEvidence,
) -> (ArchetypeTemplate, Vec<GateFinding>) {
    let (template, g4) = gate_classification(spec);
    let mut findings = gate_dimensional(spec, &template);
    findings.extend(gate_bc_ic(spec, &template));
    findings.extend(gate_wellposedness(spec, &template, plan));
    findings.extend(g4);
    if let Some(p) = plan {
        findings.extend(gate_cost_for_plan(spec, p, limits));
    }
    findings.extend(run_operational_gates(doc, spec, plan, limits, evidence));
    findings.sort_by_key(|f| f.gate);
    (template, findings)
}

fn unreadable_verdict(finding: GateFinding) -> JudgeVerdict {
    JudgeVerdict {
        outcome: Outcome::Reject,
        rejected_condition: finding.s_conditions.first().copied(),
        findings: vec![finding],
        rounds_used: 0,
        archetype: None,
    }
}

/// Judges a spec against a sequence of plans: the original followed by the
/// caller's amendments. A round with reject findings moves on to the next
/// plan while fewer than [`MAX_ROUNDS`] redesigns have been used; when no
/// amendment is left the verdict is a reject naming the first violated
/// condition. Without any plan the gates that need one reject on S3.
pub fn judge_pre(doc: &SpecDocument, plans: &[Plan], limits: &Limits) -> JudgeVerdict {
    judge_pre_with(doc, plans, limits, &RuntimeEvidence::default())
}

pub fn judge_pre_with(doc: &SpecDocument, plans: &[Plan], limits: &Limits, evidence: &RuntimeEvidence) -> JudgeVerdict {
    let report = validate_spec(doc);
    if !report.valid {
        let v = &report.violations[0];
        return unreadable_verdict(GateFinding::reject(
            GateId::R1,
            "spec-validity",
            SCondition::S1,
            format!("spec document is not valid ({}): {}", v.rule.as_str(), v.message),
        ));
    }
    let spec = match extract_six_tuple(doc) {
        Ok(s) => s,
        Err(e) => {
            return unreadable_verdict(GateFinding::reject(GateId::R1, "spec-validity", SCondition::S1, e.to_string()))
        }
    };
    let mut round = 0u32;
    loop {
        let plan = plans.get(round as usize);
        let (template, findings) = judge_round(doc, &spec, plan, limits, evidence);
        let rejected = first_condition(&findings);
        let more = (round as usize + 1) < plans.len() && round < MAX_ROUNDS;
        match rejected {
            None => {
                return JudgeVerdict {
                    outcome: Outcome::Accept,
                    findings,
                    rounds_used: round,
                    rejected_condition: None,
                    archetype: Some(template.id),
                }
            }
            Some(_) if more => round += 1,
            Some(c) => {
                return JudgeVerdict {
                    outcome: Outcome::Reject,
                    findings,
                    rounds_used: round,
                    rejected_condition: Some(c),
                    archetype: Some(template.id),
                }
            }
        }
    }
}

/// Verdict for a single caller-driven round: `redesign` while rounds remain,
/// `reject` once [`MAX_ROUNDS`] redesigns have been spent.
pub fn judge_single_round(
    doc: &SpecDocument,
    spec: &ProblemSpec,
    plan: Option<&Plan>,
    limits: &Limits,
    rounds_used: u32,
) -> JudgeVerdict {
    let (template, findings) = judge_round(doc, spec, plan, limits, &RuntimeEvidence::default());
    let rejected = first_condition(&findings);
    let outcome = match rejected {
        None => Outcome::Accept,
        Some(_) if rounds_used < MAX_ROUNDS => Outcome::Redesign,
        Some(_) => Outcome::Reject,
    };
    JudgeVerdict {
        outcome,
        findings,
        rounds_used: rounds_used.min(MAX_ROUNDS),
        rejected_condition: rejected,
        archetype: Some(template.id),
    }
}
