//! Mapping a validated document onto the six-tuple (domain, equations,
//! boundary, initial, observables, tolerance), and rendering it back.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use super::validate::looks_like_expression;
use super::{
    parse_spec, serialize_spec, validate_spec, BlockStyle, Entry, EntryValue, Item, Section,
    SpecDocument, SECTION_BOUNDARY, SECTION_DOMAIN, SECTION_EQUATIONS, SECTION_INITIAL,
    SECTION_OBSERVABLES, SECTION_TOLERANCE,
};
use crate::units::{parse_unit, Quantity};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("section `{section}`, entry `{entry}`: {reason}")]
pub struct ExtractionError {
    pub section: String,
    pub entry: String,
    pub reason: String,
}

fn extraction_error(section: &str, entry: &str, reason: impl Into<String>) -> ExtractionError {
    ExtractionError {
        section: section.to_string(),
        entry: entry.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainDesc {
    pub geometry: Option<String>,
    pub dimension: Option<u32>,
    pub extents: Option<String>,
    pub grid: Vec<usize>,
    pub entries: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquationDesc {
    pub name: String,
    pub expression: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Dirichlet,
    Neumann,
    Robin,
    Periodic,
    Inequality,
    Support,
    Initial,
}

impl ConditionKind {
    const BOUNDARY: [ConditionKind; 6] = [
        ConditionKind::Dirichlet,
        ConditionKind::Neumann,
        ConditionKind::Robin,
        ConditionKind::Periodic,
        ConditionKind::Inequality,
        ConditionKind::Support,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConditionKind::Dirichlet => "dirichlet",
            ConditionKind::Neumann => "neumann",
            ConditionKind::Robin => "robin",
            ConditionKind::Periodic => "periodic",
            ConditionKind::Inequality => "inequality",
            ConditionKind::Support => "support",
            ConditionKind::Initial => "initial",
        }
    }

    fn from_word(w: &str) -> Option<Self> {
        Self::BOUNDARY.into_iter().find(|k| k.name() == w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionDesc {
    pub kind: ConditionKind,
    pub target: String,
    pub expression: String,
}

impl ConditionDesc {
    /// Numeric right-hand side of `... = <number>`, if there is one.
    pub fn numeric_value(&self) -> Option<f64> {
        self.expression.rsplit('=').next()?.trim().parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "conditions", rename_all = "snake_case")]
pub enum InitialConditions {
    /// Explicitly declared absent (`N/A` or `none`).
    Absent,
    Given(Vec<ConditionDesc>),
}

impl InitialConditions {
    pub fn is_absent(&self) -> bool {
        matches!(self, InitialConditions::Absent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableDesc {
    pub name: String,
    pub unit_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Threshold {
    pub name: String,
    pub quantity: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToleranceDesc {
    pub thresholds: Vec<Threshold>,
    pub metric: Option<String>,
    pub settings: BTreeMap<String, String>,
}

impl ToleranceDesc {
    /// The threshold that plays the role of the target tolerance: the one
    /// named by the metric (exactly, or as a `<metric>_` prefix), else the
    /// first one declared.
    pub fn epsilon(&self) -> &Threshold {
        let by_metric = self.metric.as_deref().and_then(|m| {
            self.thresholds
                .iter()
                .find(|t| t.name == m)
                .or_else(|| self.thresholds.iter().find(|t| t.name.starts_with(&format!("{m}_"))))
        });
        by_metric.unwrap_or(&self.thresholds[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub title: String,
    pub domain: DomainDesc,
    pub equations: Vec<EquationDesc>,
    /// Numeric equation parameters with their units.
    pub parameters: BTreeMap<String, Quantity>,
    /// Non-numeric equation settings (`archetype`, `coefficients`, free text).
    pub settings: BTreeMap<String, String>,
    pub boundary: Vec<ConditionDesc>,
    pub initial: InitialConditions,
    pub observables: Vec<ObservableDesc>,
    pub tolerance: ToleranceDesc,
}

impl ProblemSpec {
    pub fn parameter(&self, name: &str) -> Option<&Quantity> {
        self.parameters.get(name)
    }

    pub fn setting(&self, name: &str) -> Option<&str> {
        self.settings.get(name).map(String::as_str)
    }

    pub fn equation_text(&self) -> String {
        self.equations
            .iter()
            .map(|e| e.expression.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Entries of a section with duplicate keys collapsed: the position of the
/// first occurrence, the content of the last.
fn dedup(section: &Section) -> Vec<&Entry> {
    let mut out: Vec<&Entry> = Vec::new();
    for e in &section.entries {
        match out.iter_mut().find(|x| x.key == e.key) {
            Some(slot) => *slot = e,
            None => out.push(e),
        }
    }
    out
}

fn mandatory<'a>(doc: &'a SpecDocument, name: &str) -> Result<Vec<&'a Entry>, ExtractionError> {
    doc.section(name)
        .map(dedup)
        .ok_or_else(|| extraction_error(name, "", "section missing"))
}

/// Named items of an entry; a single-line entry yields `(key, value)`.
fn named_items(entry: &Entry) -> Vec<(String, Item)> {
    match &entry.value {
        EntryValue::Text { .. } | EntryValue::Block { style: BlockStyle::Continued(_), .. } => entry
            .items()
            .into_iter()
            .map(|i| (entry.key.clone(), i))
            .collect(),
        EntryValue::Block { .. } => entry
            .items()
            .into_iter()
            .map(|i| (i.name.clone().unwrap_or_else(|| entry.key.clone()), i))
            .collect(),
    }
}

fn parse_grid(text: &str) -> Option<Vec<usize>> {
    let tokens: Vec<&str> = text
        .split(|c: char| c == ',' || c == '[' || c == ']' || c.is_whitespace())
        .filter(|t| !t.is_empty() && *t != "x" && *t != "×")
        .collect();
    let mut grid = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        let parts: Option<Vec<usize>> = t.split(['x', '×']).map(|p| p.parse().ok()).collect();
        match parts {
            Some(p) => grid.extend(p),
            // a trailing unit word such as "pixels" is fine
            None if i == tokens.len() - 1 && !grid.is_empty() => {}
            None => return None,
        }
    }
    (!grid.is_empty()).then_some(grid)
}

fn extract_domain(doc: &SpecDocument) -> Result<DomainDesc, ExtractionError> {
    let mut entries = BTreeMap::new();
    for e in mandatory(doc, SECTION_DOMAIN)? {
        for (name, item) in named_items(e) {
            if !item.value.is_empty() {
                entries.insert(name, item.value);
            }
        }
    }
    let geometry = ["geometry", "domain", "shape"]
        .iter()
        .find_map(|k| entries.get(*k).cloned());
    let dimension = match entries.get("dimension") {
        None => None,
        Some(v) => Some(
            v.trim_end_matches(|c: char| c.is_alphabetic())
                .trim()
                .parse::<u32>()
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| {
                    extraction_error(SECTION_DOMAIN, "dimension", format!("`{v}` is not a positive integer"))
                })?,
        ),
    };
    let extents = ["extent", "extents", "interval", "length"]
        .iter()
        .find_map(|k| entries.get(*k).cloned());
    let grid = ["grid", "grid_size", "resolution", "image_size", "geometry"]
        .iter()
        .find_map(|k| entries.get(*k).and_then(|v| parse_grid(v)))
        .unwrap_or_default();
    Ok(DomainDesc {
        geometry,
        dimension,
        extents,
        grid,
        entries,
    })
}

const SETTING_KEYS: [&str; 2] = ["archetype", "coefficients"];

type EquationParts = (Vec<EquationDesc>, BTreeMap<String, Quantity>, BTreeMap<String, String>);

fn extract_equations(doc: &SpecDocument) -> Result<EquationParts, ExtractionError> {
    let mut equations: Vec<EquationDesc> = Vec::new();
    let mut parameters = BTreeMap::new();
    let mut settings = BTreeMap::new();
    let push_eq = |eqs: &mut Vec<EquationDesc>, name: String, expr: String| {
        match eqs.iter_mut().find(|e| e.name == name) {
            Some(slot) => slot.expression = expr,
            None => eqs.push(EquationDesc { name, expression: expr }),
        }
    };
    for e in mandatory(doc, SECTION_EQUATIONS)? {
        if SETTING_KEYS.contains(&e.key.as_str()) {
            if let Some(item) = e.items().into_iter().next() {
                settings.insert(e.key.clone(), item.value);
            }
            continue;
        }
        let is_parameter_block = e.key == "parameters";
        let literal = matches!(e.value, EntryValue::Block { style: BlockStyle::Literal, .. });
        let items = named_items(e);
        let unnamed: Vec<_> = items.iter().filter(|(_, i)| i.name.is_none()).collect();
        let multiple_unnamed = literal && unnamed.len() > 1;
        let mut unnamed_idx = 0;
        for (name, item) in items.iter() {
            let value = item.value.trim();
            if value.is_empty() {
                continue;
            }
            let name = if item.name.is_none() && multiple_unnamed {
                unnamed_idx += 1;
                format!("{name}{unnamed_idx}")
            } else {
                name.clone()
            };
            if literal && !is_parameter_block {
                push_eq(&mut equations, name, value.to_string());
            } else if let Ok(q) = Quantity::parse(value) {
                parameters.insert(name, q);
            } else if !is_parameter_block && looks_like_expression(value) {
                push_eq(&mut equations, name, value.to_string());
            } else {
                settings.insert(name, value.to_string());
            }
        }
    }
    if equations.is_empty() {
        return Err(extraction_error(SECTION_EQUATIONS, "", "no equation expression found"));
    }
    Ok((equations, parameters, settings))
}

fn parse_condition(target: String, value: &str) -> ConditionDesc {
    let value = value.trim();
    let (first, rest) = match value.split_once(char::is_whitespace) {
        Some((a, b)) => (a, b.trim()),
        None => (value, ""),
    };
    if let Some(kind) = ConditionKind::from_word(&first.to_ascii_lowercase()) {
        return ConditionDesc {
            kind,
            target,
            expression: rest.to_string(),
        };
    }
    let lower = target.to_ascii_lowercase();
    let kind = ConditionKind::BOUNDARY
        .into_iter()
        .find(|k| lower.contains(k.name()))
        .unwrap_or(if value.contains(['<', '>']) {
            ConditionKind::Inequality
        } else {
            ConditionKind::Dirichlet
        });
    ConditionDesc {
        kind,
        target,
        expression: value.to_string(),
    }
}

fn extract_boundary(doc: &SpecDocument) -> Result<Vec<ConditionDesc>, ExtractionError> {
    let mut out = Vec::new();
    // Repeated targets are kept: conflicting data on one target is a finding.
    let section = doc
        .section(SECTION_BOUNDARY)
        .ok_or_else(|| extraction_error(SECTION_BOUNDARY, "", "section missing"))?;
    for e in &section.entries {
        for (name, item) in named_items(e) {
            if item.value.trim().is_empty() || is_none_marker(&item.value) {
                continue;
            }
            out.push(parse_condition(name, &item.value));
        }
    }
    Ok(out)
}

fn is_none_marker(v: &str) -> bool {
    matches!(v.trim().to_ascii_lowercase().as_str(), "n/a" | "none" | "na")
}

fn extract_initial(doc: &SpecDocument) -> Result<InitialConditions, ExtractionError> {
    let mut given = Vec::new();
    for e in mandatory(doc, SECTION_INITIAL)? {
        for (name, item) in named_items(e) {
            let v = item.value.trim();
            if v.is_empty() || is_none_marker(v) {
                continue;
            }
            given.push(ConditionDesc {
                kind: ConditionKind::Initial,
                target: name,
                expression: v.to_string(),
            });
        }
    }
    Ok(if given.is_empty() {
        InitialConditions::Absent
    } else {
        InitialConditions::Given(given)
    })
}

fn extract_observables(doc: &SpecDocument) -> Result<Vec<ObservableDesc>, ExtractionError> {
    let mut out: Vec<ObservableDesc> = Vec::new();
    let mut push = |name: &str, unit: &str| {
        let name = name.trim();
        if name.is_empty() {
            return;
        }
        match out.iter_mut().find(|o| o.name == name) {
            Some(o) => o.unit_text = unit.trim().to_string(),
            None => out.push(ObservableDesc {
                name: name.to_string(),
                unit_text: unit.trim().to_string(),
            }),
        }
    };
    for e in mandatory(doc, SECTION_OBSERVABLES)? {
        let list_key = matches!(e.key.as_str(), "observables" | "observable");
        for item in e.items() {
            match (&item.name, e.text().is_some()) {
                (Some(n), _) => push(n, &item.value),
                (None, true) if !list_key => push(&e.key, &item.value),
                (None, _) => {
                    let v = item.value.trim();
                    match v.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                        Some(list) => list.split(',').for_each(|n| push(n, "")),
                        None => push(v, ""),
                    }
                }
            }
        }
    }
    Ok(out)
}

fn extract_tolerance(doc: &SpecDocument) -> Result<ToleranceDesc, ExtractionError> {
    let mut thresholds: Vec<Threshold> = Vec::new();
    let mut metric = None;
    let mut settings = BTreeMap::new();
    for e in mandatory(doc, SECTION_TOLERANCE)? {
        for (name, item) in named_items(e) {
            let v = item.value.trim();
            if v.is_empty() {
                continue;
            }
            if name == "metric" {
                metric = Some(v.to_string());
                continue;
            }
            match Quantity::parse(v) {
                Ok(mut q) => {
                    if q.unit_text.is_empty() {
                        if let Some(c) = item.comment.as_deref().filter(|c| !c.is_empty()) {
                            if let Ok(unit) = parse_unit(c) {
                                q = Quantity {
                                    dim: unit.dimension,
                                    scale: unit.scale,
                                    logarithmic: unit.logarithmic,
                                    unit_text: c.to_string(),
                                    ..q
                                };
                            }
                        }
                    }
                    if q.value < 0.0 {
                        return Err(extraction_error(
                            SECTION_TOLERANCE,
                            &name,
                            format!("threshold {v} is negative"),
                        ));
                    }
                    match thresholds.iter_mut().find(|t| t.name == name) {
                        Some(t) => t.quantity = q,
                        None => thresholds.push(Threshold { name, quantity: q }),
                    }
                }
                Err(_) => {
                    settings.insert(name, v.to_string());
                }
            }
        }
    }
    if thresholds.is_empty() {
        return Err(extraction_error(SECTION_TOLERANCE, "", "no numeric threshold"));
    }
    Ok(ToleranceDesc {
        thresholds,
        metric,
        settings,
    })
}

/// Builds the six-tuple from a valid document.
pub fn extract_six_tuple(doc: &SpecDocument) -> Result<ProblemSpec, ExtractionError> {
    let report = validate_spec(doc);
    if !report.valid {
        let first = &report.violations[0];
        return Err(extraction_error("document", "", format!("document is not valid: {}", first.message)));
    }
    let domain = extract_domain(doc)?;
    let (equations, parameters, settings) = extract_equations(doc)?;
    Ok(ProblemSpec {
        title: doc.title.clone(),
        domain,
        equations,
        parameters,
        settings,
        boundary: extract_boundary(doc)?,
        initial: extract_initial(doc)?,
        observables: extract_observables(doc)?,
        tolerance: extract_tolerance(doc)?,
    })
}

fn text_entry(key: &str, text: String) -> Entry {
    Entry {
        key: key.to_string(),
        value: EntryValue::Text { text },
        comment: None,
        line: 0,
    }
}

fn block_entry(key: &str, style: BlockStyle, lines: Vec<String>) -> Entry {
    Entry {
        key: key.to_string(),
        value: EntryValue::Block { style, lines },
        comment: None,
        line: 0,
    }
}

fn section(name: &str, entries: Vec<Entry>) -> Section {
    Section {
        name: name.to_string(),
        entries,
        line: 0,
    }
}

/// Renders a problem back into canonical document text.
pub fn render_problem(p: &ProblemSpec) -> String {
    let mut sections = Vec::new();

    sections.push(section(
        SECTION_DOMAIN,
        p.domain
            .entries
            .iter()
            .map(|(k, v)| text_entry(k, v.clone()))
            .collect(),
    ));

    let mut eq_entries = Vec::new();
    for key in SETTING_KEYS {
        if let Some(v) = p.settings.get(key) {
            eq_entries.push(text_entry(key, v.clone()));
        }
    }
    eq_entries.push(block_entry(
        "equations",
        BlockStyle::Literal,
        p.equations
            .iter()
            .map(|e| format!("{}: {}", e.name, e.expression))
            .collect(),
    ));
    let param_lines: Vec<String> = p
        .parameters
        .iter()
        .map(|(k, q)| format!("{k}: {q}"))
        .chain(
            p.settings
                .iter()
                .filter(|(k, _)| !SETTING_KEYS.contains(&k.as_str()))
                .map(|(k, v)| format!("{k}: {v}")),
        )
        .collect();
    if !param_lines.is_empty() {
        eq_entries.push(block_entry("parameters", BlockStyle::Nested, param_lines));
    }
    sections.push(section(SECTION_EQUATIONS, eq_entries));

    sections.push(section(
        SECTION_BOUNDARY,
        vec![block_entry(
            "boundary",
            BlockStyle::Literal,
            p.boundary
                .iter()
                .map(|c| format!("{}: {} {}", c.target, c.kind.name(), c.expression).trim_end().to_string())
                .collect(),
        )],
    ));

    let initial = match &p.initial {
        InitialConditions::Absent => text_entry("initial", "N/A".into()),
        InitialConditions::Given(list) => block_entry(
            "initial",
            BlockStyle::Literal,
            list.iter().map(|c| format!("{}: {}", c.target, c.expression)).collect(),
        ),
    };
    sections.push(section(SECTION_INITIAL, vec![initial]));

    sections.push(section(
        SECTION_OBSERVABLES,
        vec![block_entry(
            "observables",
            BlockStyle::Nested,
            p.observables
                .iter()
                .map(|o| {
                    if o.unit_text.is_empty() {
                        format!("- {}", o.name)
                    } else {
                        format!("- {}: {}", o.name, o.unit_text)
                    }
                })
                .collect(),
        )],
    ));

    let mut tol = vec![block_entry(
        "tolerance",
        BlockStyle::Nested,
        p.tolerance
            .thresholds
            .iter()
            .map(|t| format!("{}: {}", t.name, t.quantity))
            .collect(),
    )];
    if let Some(m) = &p.tolerance.metric {
        tol.push(text_entry("metric", m.clone()));
    }
    for (k, v) in &p.tolerance.settings {
        tol.push(text_entry(k, v.clone()));
    }
    sections.push(section(SECTION_TOLERANCE, tol));

    let doc = SpecDocument {
        title: p.title.clone(),
        sections,
        source_digest: super::Digest([0; 32]),
    };
    serialize_spec(&doc)
}

/// Renders and re-parses, for callers that want a document rather than text.
pub fn render_document(p: &ProblemSpec) -> SpecDocument {
    parse_spec(render_problem(p).as_bytes()).expect("rendered documents are grammar-valid")
}
