use std::collections::BTreeMap;

use serde::Serialize;

use super::{Entry, SpecDocument, MANDATORY_SECTIONS, SECTION_EQUATIONS, SECTION_TOLERANCE};
use crate::units::Quantity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RuleId {
    #[serde(rename = "V1-sections")]
    V1Sections,
    #[serde(rename = "V2-tolerance")]
    V2Tolerance,
    #[serde(rename = "V3-equations")]
    V3Equations,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::V1Sections => "V1-sections",
            RuleId::V2Tolerance => "V2-tolerance",
            RuleId::V3Equations => "V3-equations",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub rule: RuleId,
    pub message: String,
    pub line: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
    /// Lowercase hex SHA-256 of the source bytes.
    pub digest: String,
}

impl ValidationReport {
    pub fn has_rule(&self, rule: RuleId) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

const OPERATOR_TOKENS: &[&str] = &[
    "laplacian", "nabla", "grad", "div", "curl", "partial", "integral", "sum", "min", "max",
    "argmin", "argmax", "radon", "fft", "exp", "log", "sin", "cos", "sqrt", "\\",
];

const MATH_CHARS: &[char] = &['=', '+', '-', '*', '/', '^', '(', ')'];

/// Whether a value reads as a mathematical expression: it contains an
/// operator character or a named operator token, and is not merely a
/// number-with-unit (parameter values such as `1e-4 m^2/s` do not count).
pub(crate) fn looks_like_expression(value: &str) -> bool {
    let v = value.trim();
    if v.is_empty() || Quantity::parse(v).is_ok() {
        return false;
    }
    if v.contains(MATH_CHARS) {
        return true;
    }
    let lower = v.to_ascii_lowercase();
    lower
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '\\'))
        .any(|tok| OPERATOR_TOKENS.contains(&tok) || tok.starts_with('\\'))
}

/// Whether a value is a number with an optional known unit.
pub(crate) fn is_numeric_threshold(value: &str) -> bool {
    Quantity::parse(value).is_ok()
}

fn entry_values(entry: &Entry) -> impl Iterator<Item = String> + '_ {
    entry.items().into_iter().map(|i| i.value)
}

/// Checks the three validity rules: mandatory sections present and
/// non-empty (V1), a numeric tolerance threshold (V2), and an equation
/// expression (V3). Duplicate keys produce warnings, not violations.
pub fn validate_spec(doc: &SpecDocument) -> ValidationReport {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();

    for name in MANDATORY_SECTIONS {
        let matching: Vec<_> = doc.sections.iter().filter(|s| s.name == name).collect();
        match matching.first() {
            None => violations.push(Violation {
                rule: RuleId::V1Sections,
                message: format!("missing mandatory section `## {name}`"),
                line: None,
            }),
            Some(s) => {
                if !s.entries.iter().any(|e| !e.is_empty()) {
                    violations.push(Violation {
                        rule: RuleId::V1Sections,
                        message: format!("section `## {name}` has no non-empty entry"),
                        line: Some(s.line),
                    });
                }
                if matching.len() > 1 {
                    warnings.push(format!(
                        "section `## {name}` appears {} times; only the first is used",
                        matching.len()
                    ));
                }
            }
        }
    }

    for section in &doc.sections {
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &section.entries {
            if let Some(prev) = seen.insert(&e.key, e.line) {
                warnings.push(format!(
                    "duplicate key `{}` in `## {}` (lines {prev} and {}); last occurrence wins",
                    e.key, section.name, e.line
                ));
            }
        }
    }

    if let Some(tol) = doc.section(SECTION_TOLERANCE) {
        let numeric = tol
            .entries
            .iter()
            .flat_map(entry_values)
            .any(|v| is_numeric_threshold(&v));
        if !numeric {
            violations.push(Violation {
                rule: RuleId::V2Tolerance,
                message: "`## Tolerance` contains no numerical threshold (a number with an optional unit)"
                    .into(),
                line: Some(tol.line),
            });
        }
    }

    if let Some(eq) = doc.section(SECTION_EQUATIONS) {
        let has_expr = eq
            .entries
            .iter()
            .flat_map(entry_values)
            .any(|v| looks_like_expression(&v));
        if !has_expr {
            violations.push(Violation {
                rule: RuleId::V3Equations,
                message: "`## Equations` contains no mathematical expression (checked as: contains one of \
                          `= + - * / ^ ( )` or a named operator, and is not a bare number-with-unit)"
                    .into(),
                line: Some(eq.line),
            });
        }
    }

    ValidationReport {
        valid: violations.is_empty(),
        violations,
        warnings,
        digest: doc.source_digest.to_hex(),
    }
}
