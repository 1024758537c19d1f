//! Archetype templates and the classification gate (G4).

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GateFinding, GateId, SCondition, Severity};
use crate::specmd::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PdeClass {
    Elliptic,
    Parabolic,
    Hyperbolic,
    Ode,
    StiffOde,
    ConservationLaw,
    Unknown,
}

impl PdeClass {
    /// Evolution problems, which need initial data.
    pub fn is_evolutionary(self) -> bool {
        !matches!(self, PdeClass::Elliptic | PdeClass::Unknown)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
    Nonzero,
}

impl Sign {
    pub fn admits(self, v: f64) -> bool {
        match self {
            Sign::Positive => v > 0.0,
            Sign::Negative => v < 0.0,
            Sign::Nonzero => v != 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityRule {
    /// Explicit diffusion: `kappa dt / h^2 <= 1 / (2 dim)`.
    FtcsDiffusion,
    /// Explicit transport: `|c| dt / h <= 1`.
    AdvectiveCfl,
    /// Explicit schemes rejected above the stiffness limit.
    Stiffness,
    /// Elliptic operators need a positive coercivity constant.
    Coercivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchetypeTemplate {
    pub id: String,
    pub pde_class: PdeClass,
    /// Required parameters and their unit annotation.
    pub params: BTreeMap<String, String>,
    #[serde(default)]
    pub signs: BTreeMap<String, Sign>,
    pub requires_ic: bool,
    pub requires_full_boundary: bool,
    pub stability_rule: Option<StabilityRule>,
    /// Alternative token sets; a template matches when every token of one
    /// set occurs in the equation text.
    #[serde(default)]
    pub keywords: Vec<Vec<String>>,
}

impl ArchetypeTemplate {
    pub fn unknown() -> Self {
        ArchetypeTemplate {
            id: "unknown".into(),
            pde_class: PdeClass::Unknown,
            params: BTreeMap::new(),
            signs: BTreeMap::new(),
            requires_ic: false,
            requires_full_boundary: false,
            stability_rule: None,
            keywords: Vec::new(),
        }
    }

    fn matches(&self, tokens: &BTreeSet<String>) -> bool {
        self.keywords
            .iter()
            .any(|set| !set.is_empty() && set.iter().all(|k| tokens.contains(k)))
    }
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template catalog is malformed: {0}")]
    Format(#[from] serde_json::Error),
    #[error("duplicate archetype id `{0}`")]
    DuplicateId(String),
}

/// Parses a catalog: a JSON array whose order is the keyword-match priority.
pub fn load_templates(json: &str) -> Result<Vec<ArchetypeTemplate>, TemplateError> {
    let list: Vec<ArchetypeTemplate> = serde_json::from_str(json)?;
    let mut seen = BTreeSet::new();
    for t in &list {
        if !seen.insert(t.id.clone()) {
            return Err(TemplateError::DuplicateId(t.id.clone()));
        }
    }
    Ok(list)
}

pub fn builtin_templates() -> &'static [ArchetypeTemplate] {
    static CATALOG: OnceLock<Vec<ArchetypeTemplate>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        load_templates(include_str!("../../data/archetypes.json")).expect("shipped catalog is well formed")
    })
}

pub fn template_by_id(id: &str) -> Option<&'static ArchetypeTemplate> {
    builtin_templates().iter().find(|t| t.id == id)
}

fn equation_tokens(text: &str) -> BTreeSet<String> {
    let lower = text.to_lowercase();
    let mut tokens: BTreeSet<String> = lower
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    if lower.contains('∇') {
        tokens.insert("nabla".into());
    }
    if lower.contains('∂') {
        tokens.insert("partial".into());
    }
    tokens
}

/// `a=1, b=0, c=1` style coefficient list.
fn parse_coefficients(text: &str) -> Option<(f64, f64, f64)> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut map = BTreeMap::new();
    for part in compact.split([',', ';']).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=')?;
        map.insert(k.trim().to_ascii_lowercase(), v.trim().parse::<f64>().ok()?);
    }
    Some((*map.get("a")?, *map.get("b")?, *map.get("c")?))
}

/// Selects the archetype: an explicit `archetype:` setting, else keyword
/// matching on the equation text in catalog order, else the discriminant
/// `b^2 - 4ac` of declared second-order coefficients. Anything else falls
/// back to `unknown` with a flag.
pub fn gate_classification(spec: &ProblemSpec) -> (ArchetypeTemplate, Vec<GateFinding>) {
    let g4 = GateId::G4Classification;
    if let Some(id) = spec.setting("archetype") {
        let id = id.trim();
        return match template_by_id(id) {
            Some(t) => (
                t.clone(),
                vec![GateFinding::new(g4, "explicit-archetype", Severity::Info, &[], format!("archetype `{id}` declared"))],
            ),
            None => (
                ArchetypeTemplate::unknown(),
                vec![GateFinding::reject(
                    g4,
                    "unknown-archetype",
                    SCondition::S1,
                    format!("declared archetype `{id}` is not in the template catalog"),
                )],
            ),
        };
    }
    let tokens = equation_tokens(&spec.equation_text());
    if let Some(t) = builtin_templates().iter().find(|t| t.matches(&tokens)) {
        return (
            t.clone(),
            vec![GateFinding::new(
                g4,
                "keyword",
                Severity::Info,
                &[],
                format!("equation text matches the `{}` archetype", t.id),
            )],
        );
    }
    if let Some((a, b, c)) = spec.setting("coefficients").and_then(parse_coefficients) {
        let disc = b * b - 4.0 * a * c;
        let scale = (b * b).abs().max((4.0 * a * c).abs()).max(f64::MIN_POSITIVE);
        let id = if disc.abs() <= 1e-12 * scale {
            "heat"
        } else if disc < 0.0 {
            "poisson"
        } else {
            "wave"
        };
        let t = template_by_id(id).expect("shipped archetype");
        return (
            t.clone(),
            vec![GateFinding::new(
                g4,
                "discriminant",
                Severity::Info,
                &[],
                format!("b^2 - 4ac = {disc} classifies the operator as {:?}", t.pde_class).to_lowercase(),
            )
            .with("discriminant", disc)],
        );
    }
    (
        ArchetypeTemplate::unknown(),
        vec![GateFinding::new(
            g4,
            "classification-fallback",
            Severity::Flag,
            &[SCondition::S1],
            "classification fallback: no archetype, keyword or coefficient set identifies the equations",
        )],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_loads_with_unique_ids() {
        let ids: Vec<_> = builtin_templates().iter().map(|t| t.id.as_str()).collect();
        for want in ["heat", "poisson", "wave", "advection", "stiff-ode", "generic-ode", "scalar-conservation-law"] {
            assert!(ids.contains(&want), "{want}");
        }
        let dup = r#"[{"id":"x","pde_class":"ode","params":{},"requires_ic":true,"requires_full_boundary":false,"stability_rule":null},
                      {"id":"x","pde_class":"ode","params":{},"requires_ic":true,"requires_full_boundary":false,"stability_rule":null}]"#;
        assert!(matches!(load_templates(dup), Err(TemplateError::DuplicateId(_))));
    }

    #[test]
    fn tokens_distinguish_time_derivatives() {
        let t = equation_tokens("u_tt = c^2 * u_xx");
        assert!(t.contains("u_tt") && !t.contains("u_t"));
        let t = equation_tokens("u_t + (u^2/2)_x = 0");
        assert!(t.contains("_x") && t.contains("u_t"));
        assert!(equation_tokens("∇²u = f").contains("nabla"));
    }

    #[test]
    fn coefficients() {
        assert_eq!(parse_coefficients("a=1, b=0, c=1"), Some((1.0, 0.0, 1.0)));
        assert_eq!(parse_coefficients("a = 1; b = 2, c = 1"), Some((1.0, 2.0, 1.0)));
        assert_eq!(parse_coefficients("a = 1"), None);
        assert_eq!(parse_coefficients("a=1, b=x, c=1"), None);
    }
}
