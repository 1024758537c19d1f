use super::*;
use crate::audit::{CheckId, CheckResult};
use crate::gates::{judge_pre, Limits};
use crate::opgraph::Plan;
use crate::specmd::parse_spec;

const HEAT: &str = include_str!("../../data/specs/heat_1d.md");
const HEAT_FTCS: &str = include_str!("../../data/plans/heat_ftcs.json");
const POISSON: &str = include_str!("../../data/specs/poisson_2d.md");
const POISSON_DIRECT: &str = include_str!("../../data/plans/poisson_direct.json");

fn accept() -> JudgeVerdict {
    JudgeVerdict { outcome: Outcome::Accept, findings: vec![], rounds_used: 0, rejected_condition: None, archetype: Some("heat".into()) }
}

fn inputs<'a>(verdict: &'a JudgeVerdict, audit: Option<&'a AuditReport>, b: Option<f64>, eps: Option<f64>) -> CertificateInputs<'a> {
    CertificateInputs {
        spec_digest: "00",
        plan_digest: Some("11"),
        verdict,
        budget: None,
        audit,
        probes: &[],
        bound_b: b,
        tolerance_eps: eps,
        gaps: &[],
    }
}

fn clean_audit() -> AuditReport {
    AuditReport::from_checks(vec![CheckResult::compare(CheckId::Finite, 0.0, 0.0)], vec![])
}

#[test]
fn bound_within_tolerance_is_certified() {
    let v = accept();
    let a = clean_audit();
    let c = emit_certificate(inputs(&v, Some(&a), Some(1e-4), Some(1e-3))).unwrap();
    assert_eq!(c.outcome, CertOutcome::Certified);
    assert!(c.reasons.is_empty());
    assert!(verify_certificate(&c));
}

#[test]
fn ill_posed_spec_is_rejected_on_s2() {
    let doc = parse_spec(HEAT.replace("initial: u = sin(pi*x)", "initial: N/A").as_bytes()).unwrap();
    let plan = Plan::from_json(HEAT_FTCS).unwrap();
    let v = judge_pre(&doc, &[plan], &Limits::default());
    let c = emit_certificate(inputs(&v, None, None, None)).unwrap();
    assert_eq!(c.outcome, CertOutcome::Rejected);
    assert_eq!(c.rejected_condition, Some(SCondition::S2));
    assert_eq!(c.verdict["rejected_condition"], "S2");
}

#[test]
fn audit_flag_flags_a_clean_verdict() {
    let v = accept();
    let a = AuditReport::from_checks(vec![CheckResult::compare(CheckId::Conservation, 1e-9, 1e-12)], vec![]);
    let c = emit_certificate(inputs(&v, Some(&a), None, Some(1e-3))).unwrap();
    assert_eq!(c.outcome, CertOutcome::Flagged);
    assert_eq!(c.reasons, vec!["audit check conservation flagged"]);
}

#[test]
fn bound_above_tolerance_or_infinite_never_certifies() {
    let v = accept();
    let c = emit_certificate(inputs(&v, None, Some(2e-3), Some(1e-3))).unwrap();
    assert_eq!(c.outcome, CertOutcome::Flagged);
    let c = emit_certificate(inputs(&v, None, Some(f64::INFINITY), Some(1e-3))).unwrap();
    assert_eq!(c.outcome, CertOutcome::Flagged);
    assert_eq!(c.bound_b, None);
    assert!(verify_certificate(&Certificate::from_bytes(&c.to_bytes()).unwrap()));
}

#[test]
fn bound_without_tolerance_is_inconsistent() {
    let v = accept();
    let e = emit_certificate(inputs(&v, None, Some(1e-4), None));
    assert!(matches!(e, Err(CertifyError::InconsistentInputs(_))));
}

#[test]
fn edits_break_the_seal_and_round_trips_keep_it() {
    let v = accept();
    let a = clean_audit();
    let c = emit_certificate(inputs(&v, Some(&a), Some(1e-4), Some(1e-3))).unwrap();
    let mut edited = c.clone();
    edited.bound_b = Some(1.1e-4);
    assert!(!verify_certificate(&edited));
    let back = Certificate::from_bytes(&c.to_bytes()).unwrap();
    assert_eq!(back, c);
    assert!(verify_certificate(&back));
    assert!(verify_certificate_bytes(&c.to_bytes()));
}

#[test]
fn equivalent_float_spelling_is_caught_on_bytes() {
    let v = accept();
    let c = emit_certificate(inputs(&v, None, Some(1e-10), Some(1e-3))).unwrap();
    let text = String::from_utf8(c.to_bytes()).unwrap();
    assert!(text.contains("1e-10"));
    let respelled = text.replacen("1e-10", "1E-10", 1);
    assert!(Certificate::from_bytes(respelled.as_bytes()).is_ok());
    assert!(!verify_certificate_bytes(respelled.as_bytes()));
}

#[test]
fn heat_pipeline_certifies_and_is_byte_stable() {
    let plan = Plan::from_json(HEAT_FTCS).unwrap();
    let cfg = PipelineConfig::default();
    let a = run_pipeline(HEAT.as_bytes(), std::slice::from_ref(&plan), &cfg).unwrap();
    assert_eq!(a.certificate.outcome, CertOutcome::Certified, "{:?}", a.certificate.reasons);
    let b = a.certificate.bound_b.unwrap();
    assert!(b > 0.0 && b <= 1e-3, "{b}");
    assert_eq!(a.probes.len(), 3);
    let again = run_pipeline(HEAT.as_bytes(), &[plan], &cfg).unwrap();
    assert_eq!(a.certificate.to_bytes(), again.certificate.to_bytes());
}

#[test]
fn unchecked_mode_fills_gaps_and_certifies() {
    let text = HEAT.replace("initial: u = sin(pi*x)", "initial: N/A");
    let plan = Plan::from_json(HEAT_FTCS).unwrap();
    let cfg = PipelineConfig { stages: Stages::NONE, ..PipelineConfig::default() };
    let run = run_pipeline(text.as_bytes(), &[plan], &cfg).unwrap();
    assert_eq!(run.certificate.outcome, CertOutcome::Certified);
    let exec = run.execution.unwrap();
    assert!(exec.notes.iter().any(|n| n.contains("initial data missing")));
    assert!(exec.series.last().values.iter().all(|v| *v == 0.0));
}

#[test]
fn unknown_solver_is_an_error() {
    let wave = include_str!("../../data/specs/wave_1d.md");
    let plan = Plan::from_json(include_str!("../../data/plans/wave_rk4.json")).unwrap();
    let e = run_pipeline(wave.as_bytes(), &[plan], &PipelineConfig::default());
    assert!(matches!(e, Err(PipelineError::Unsupported(_))), "{e:?}");
}

#[test]
fn poisson_forcing_written_as_an_equation_is_used() {
    let run = run_pipeline(POISSON.as_bytes(), &[Plan::from_json(POISSON_DIRECT).unwrap()], &PipelineConfig::default()).unwrap();
    let exec = run.execution.unwrap();
    assert!(exec.notes.is_empty(), "{:?}", exec.notes);
    // u = sin(pi x) sin(pi y) peaks at 1 in the centre.
    assert!((exec.series.last().max_abs() - 1.0).abs() < 1e-3);
    let b = run.certificate.bound_b.unwrap();
    assert!(b > 0.0 && b <= 1e-4, "{b}");
}

#[test]
fn executor_gaps_flag() {
    let v = accept();
    let a = clean_audit();
    let gaps = ["initial data missing: zero used".to_string()];
    let c = emit_certificate(CertificateInputs { gaps: &gaps, ..inputs(&v, Some(&a), Some(1e-4), Some(1e-3)) }).unwrap();
    assert_eq!(c.outcome, CertOutcome::Flagged);
    assert_eq!(c.reasons, vec!["executor: initial data missing: zero used".to_string()]);
}

#[test]
fn named_end_with_other_data_is_not_borrowed() {
    let text = HEAT.replace("right: dirichlet u = 0", "right: neumann du/dx = 0");
    let plan = Plan::from_json(HEAT_FTCS).unwrap();
    let cfg = PipelineConfig { stages: Stages::NONE, ..PipelineConfig::default() };
    let err = run_pipeline(text.as_bytes(), &[plan], &cfg).unwrap_err();
    assert!(matches!(err, PipelineError::Unsupported(ref m) if m.contains("neumann data on `right`")), "{err}");
}
