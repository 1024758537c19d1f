//! Hash-sealed certificates and the end-to-end pipeline that produces them.
//!
//! A certificate snapshots the verdict, budget, audit and probe reports as
//! canonical JSON values and seals them with SHA-256 over the canonical
//! serialization of every other field. Non-finite numbers inside the
//! snapshots become `null`, so a parsed certificate re-seals identically.

pub mod expr;
mod pipeline;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::audit::AuditReport;
use crate::canonical::{sha256_hex, to_canonical_bytes};
use crate::gates::{JudgeVerdict, Outcome, SCondition, Severity};
use crate::opgraph::ErrorBudget;
use crate::probes::ProbeReport;

pub use pipeline::{
    execute, probe_problem_for, residual_context_for, run_pipeline, Execution, PipelineConfig, PipelineError, PipelineRun, Solved, Stages,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("inconsistent certificate inputs: {0}")]
    InconsistentInputs(String),
    #[error("certificate is not valid JSON: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertOutcome {
    Certified,
    Flagged,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub spec_digest: String,
    pub plan_digest: Option<String>,
    pub verdict: Value,
    pub budget: Option<Value>,
    pub audit: Option<Value>,
    pub probes: Vec<Value>,
    #[serde(rename = "bound_B")]
    pub bound_b: Option<f64>,
    pub tolerance_eps: Option<f64>,
    pub outcome: CertOutcome,
    pub rejected_condition: Option<SCondition>,
    /// Why the outcome is not `certified`, in mapping order.
    pub reasons: Vec<String>,
    pub seal: String,
}

/// Everything a certificate binds. Rejection certificates need only the
/// digest and verdict.
#[derive(Debug, Clone, Copy)]
pub struct CertificateInputs<'a> {
    pub spec_digest: &'a str,
    pub plan_digest: Option<&'a str>,
    pub verdict: &'a JudgeVerdict,
    pub budget: Option<&'a ErrorBudget>,
    pub audit: Option<&'a AuditReport>,
    pub probes: &'a [ProbeReport],
    pub bound_b: Option<f64>,
    pub tolerance_eps: Option<f64>,
    /// Data the executor had to invent; each one flags.
    pub gaps: &'a [String],
}

fn snapshot<T: Serialize>(v: &T) -> Value {
    // Canonical round trip: non-finite floats become null here, exactly as
    // they would after a write and re-read.
    serde_json::from_slice(&to_canonical_bytes(v)).expect("canonical JSON parses")
}

fn seal_of(cert: &Certificate) -> String {
    let mut v = serde_json::to_value(cert).expect("certificate serializes");
    v.as_object_mut().expect("struct").remove("seal");
    sha256_hex(&to_canonical_bytes(&v))
}

/// Outcome mapping: a non-accept verdict rejects; any flag finding, audit
/// flag, executor gap, probe flag or a bound above the tolerance flags;
/// otherwise the result is certified.
pub fn emit_certificate(inp: CertificateInputs<'_>) -> Result<Certificate, CertifyError> {
    if inp.bound_b.is_some() && inp.tolerance_eps.is_none() {
        return Err(CertifyError::InconsistentInputs("bound_B given without a tolerance".into()));
    }
    let mut reasons = Vec::new();
    let rejected = inp.verdict.outcome != Outcome::Accept;
    if rejected {
        let cond = inp.verdict.rejected_condition.map_or("unspecified".to_string(), |c| format!("{c:?}"));
        reasons.push(format!("verdict {:?} on {cond}", inp.verdict.outcome).to_lowercase());
    }
    for f in inp.verdict.findings.iter().filter(|f| f.severity == Severity::Flag) {
        reasons.push(format!("gate {} flagged `{}`", f.gate, f.rule));
    }
    if let Some(a) = inp.audit {
        for c in a.checks.iter().filter(|c| c.flagged()) {
            reasons.push(format!("audit check {} flagged", serde_json::to_value(c.id).expect("unit variant").as_str().unwrap_or("?")));
        }
    }
    for g in inp.gaps {
        reasons.push(format!("executor: {g}"));
    }
    for p in inp.probes.iter().filter(|p| p.flagged) {
        reasons.push(format!("{} probe flagged", serde_json::to_value(p.probe).expect("unit variant").as_str().unwrap_or("?")));
    }
    let mut bound_b = inp.bound_b;
    if let (Some(b), Some(eps)) = (inp.bound_b, inp.tolerance_eps) {
        if !b.is_finite() {
            bound_b = None;
            reasons.push("bound is not finite".into());
        } else if b > eps {
            reasons.push(format!("bound {b:e} exceeds tolerance {eps:e}"));
        }
    }
    let outcome = if rejected {
        CertOutcome::Rejected
    } else if reasons.is_empty() {
        CertOutcome::Certified
    } else {
        CertOutcome::Flagged
    };
    let mut cert = Certificate {
        spec_digest: inp.spec_digest.to_string(),
        plan_digest: inp.plan_digest.map(str::to_string),
        verdict: snapshot(inp.verdict),
        budget: inp.budget.map(snapshot),
        audit: inp.audit.map(snapshot),
        probes: inp.probes.iter().map(snapshot).collect(),
        bound_b,
        tolerance_eps: inp.tolerance_eps.filter(|e| e.is_finite()),
        outcome,
        rejected_condition: if rejected { inp.verdict.rejected_condition } else { None },
        reasons,
        seal: String::new(),
    };
    cert.seal = seal_of(&cert);
    Ok(cert)
}

/// Recomputes the seal.
pub fn verify_certificate(cert: &Certificate) -> bool {
    seal_of(cert) == cert.seal
}

impl Certificate {
    /// Canonical bytes; this is the on-disk form.
    pub fn to_bytes(&self) -> Vec<u8> {
        to_canonical_bytes(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CertifyError> {
        serde_json::from_slice(bytes).map_err(|e| CertifyError::Format(e.to_string()))
    }
}

/// Verifies serialized certificate bytes: they must parse, be in canonical
/// form, and carry a matching seal. The canonical-form check catches edits
/// that parse to the same values, such as `1e-3` rewritten as `1E-3`.
pub fn verify_certificate_bytes(bytes: &[u8]) -> bool {
    match Certificate::from_bytes(bytes) {
        Ok(c) => c.to_bytes() == bytes && verify_certificate(&c),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests;
