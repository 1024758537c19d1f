//! Fixture loading shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use serde::Deserialize;
use serde_json::Value;
use simjudge::certify::{run_pipeline, CertOutcome, PipelineConfig, PipelineError, Stages};
use simjudge::opgraph::Plan;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn spec_text(name: &str) -> String {
    std::fs::read_to_string(data_dir().join("specs").join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn plan_value(name: &str) -> Value {
    let text = std::fs::read_to_string(data_dir().join("plans").join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    serde_json::from_str(&text).unwrap()
}

pub fn plan(name: &str) -> Plan {
    serde_json::from_value(plan_value(name)).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Category {
    #[serde(rename = "a")]
    Incomplete,
    #[serde(rename = "b")]
    IllPosed,
    #[serde(rename = "c")]
    Qualitative,
    #[serde(rename = "clean")]
    Clean,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub id: String,
    pub category: Category,
    #[serde(default)]
    pub boundary: bool,
    pub spec: String,
    #[serde(default)]
    pub edits: Vec<(String, String)>,
    pub plan: String,
    /// Overrides merged into the plan's scheme; `null` removes a key.
    #[serde(default)]
    pub scheme: serde_json::Map<String, Value>,
}

impl Case {
    pub fn is_fault(&self) -> bool {
        self.category != Category::Clean
    }

    /// Spec text with every edit applied; each edit must match exactly once.
    pub fn spec_text(&self) -> String {
        let mut text = spec_text(&self.spec);
        for (from, to) in &self.edits {
            assert_eq!(text.matches(from.as_str()).count(), 1, "{}: edit `{from}` must match once", self.id);
            text = text.replacen(from.as_str(), to, 1);
        }
        text
    }

    pub fn plan(&self) -> Plan {
        let mut v = plan_value(&self.plan);
        let scheme = v["scheme"].as_object_mut().expect("plan has a scheme");
        for (k, val) in &self.scheme {
            if val.is_null() {
                assert!(scheme.remove(k).is_some(), "{}: nothing to remove at `{k}`", self.id);
            } else {
                scheme.insert(k.clone(), val.clone());
            }
        }
        serde_json::from_value(v).unwrap_or_else(|e| panic!("{}: {e}", self.id))
    }
}

pub fn cases() -> Vec<Case> {
    #[derive(Deserialize)]
    struct File {
        cases: Vec<Case>,
    }
    let text = std::fs::read_to_string(data_dir().join("funnel").join("cases.json")).unwrap();
    serde_json::from_str::<File>(&text).unwrap().cases
}

/// Stages of the funnel experiment, in order: nothing, pre-gates, gates and
/// audit, everything.
pub const FUNNEL: [(&str, Stages); 4] = [
    ("no judge", Stages::NONE),
    ("gates", Stages { gates: true, audit: false, probes: false }),
    ("gates+audit", Stages { gates: true, audit: true, probes: false }),
    ("gates+audit+probes", Stages::ALL),
];

pub fn outcome(case: &Case, stages: Stages) -> Result<CertOutcome, PipelineError> {
    let cfg = PipelineConfig { stages, ..PipelineConfig::default() };
    run_pipeline(case.spec_text().as_bytes(), &[case.plan()], &cfg).map(|r| r.certificate.outcome)
}

#[derive(Debug)]
pub struct FunnelRow {
    pub case: Case,
    /// One outcome per stage of [`FUNNEL`].
    pub outcomes: Vec<Result<CertOutcome, PipelineError>>,
}

impl FunnelRow {
    /// A fault that came out certified.
    pub fn silent(&self, stage: usize) -> bool {
        self.case.is_fault() && matches!(self.outcomes[stage], Ok(CertOutcome::Certified))
    }
}

pub fn run_funnel() -> Vec<FunnelRow> {
    cases()
        .into_iter()
        .map(|case| {
            let outcomes = FUNNEL.iter().map(|(_, s)| outcome(&case, *s)).collect();
            FunnelRow { case, outcomes }
        })
        .collect()
}
