//! Reading, validating and interpreting `spec.md` problem documents.
//!
//! A document is a `# Specification: <title>` header followed by `## <name>`
//! sections of `key: value` entries. A value of `|` opens a literal block of
//! indented lines; an empty value followed by indented lines opens a nested
//! block (lists, sub-maps). Six sections are mandatory: Domain, Equations,
//! Boundary Conditions, Initial Conditions, Observables and Tolerance. Any
//! other section is kept verbatim and never interpreted here.

mod extract;
mod parse;
mod validate;

use std::fmt;

use serde::Serialize;
use sha2::{Digest as _, Sha256};

pub use extract::{
    extract_six_tuple, render_document, render_problem, ConditionDesc, ConditionKind, DomainDesc, EquationDesc,
    ExtractionError, InitialConditions, ObservableDesc, ProblemSpec, Threshold, ToleranceDesc,
};
pub use parse::{parse_spec, serialize_spec, ParseError};
pub use validate::{validate_spec, RuleId, ValidationReport, Violation};

pub const SECTION_DOMAIN: &str = "Domain";
pub const SECTION_EQUATIONS: &str = "Equations";
pub const SECTION_BOUNDARY: &str = "Boundary Conditions";
pub const SECTION_INITIAL: &str = "Initial Conditions";
pub const SECTION_OBSERVABLES: &str = "Observables";
pub const SECTION_TOLERANCE: &str = "Tolerance";

pub const MANDATORY_SECTIONS: [&str; 6] = [
    SECTION_DOMAIN,
    SECTION_EQUATIONS,
    SECTION_BOUNDARY,
    SECTION_INITIAL,
    SECTION_OBSERVABLES,
    SECTION_TOLERANCE,
];

/// SHA-256 digest of a byte string.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecDocument {
    pub title: String,
    pub sections: Vec<Section>,
    pub source_digest: Digest,
}

impl SpecDocument {
    /// First section with exactly this name.
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section {
    pub name: String,
    pub entries: Vec<Entry>,
    /// 1-based line of the `## ` header.
    pub line: usize,
}

impl Section {
    /// Last entry with this key; later duplicates override earlier ones.
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().rev().find(|e| e.key == key)
    }

    pub fn is_mandatory(&self) -> bool {
        MANDATORY_SECTIONS.contains(&self.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub key: String,
    pub value: EntryValue,
    pub comment: Option<String>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryValue {
    /// `key: value` on a single line.
    Text { text: String },
    /// `key: |`, `key:` or `key: head` followed by indented lines.
    Block { style: BlockStyle, lines: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "style", content = "head", rename_all = "snake_case")]
pub enum BlockStyle {
    /// Introduced by the literal `|` value.
    Literal,
    /// Introduced by an empty value; lines are list items or sub-entries.
    Nested,
    /// A single-line value continued on indented lines.
    Continued(String),
}

impl Entry {
    pub fn is_empty(&self) -> bool {
        match &self.value {
            EntryValue::Text { text } => text.is_empty(),
            EntryValue::Block { style, lines } => {
                lines.is_empty() && !matches!(style, BlockStyle::Continued(h) if !h.is_empty())
            }
        }
    }

    /// Single-line value, if this entry has one.
    pub fn text(&self) -> Option<&str> {
        match &self.value {
            EntryValue::Text { text } => Some(text),
            EntryValue::Block { .. } => None,
        }
    }

    /// Block lines with their relative indentation preserved.
    pub fn lines(&self) -> &[String] {
        match &self.value {
            EntryValue::Text { .. } => &[],
            EntryValue::Block { lines, .. } => lines,
        }
    }

    /// Interprets each block line (or the single value) as a `name: value`
    /// item, stripping list bullets and trailing comments. Lines indented
    /// deeper than the first item continue the previous item's value.
    pub fn items(&self) -> Vec<Item> {
        match &self.value {
            EntryValue::Text { text } => vec![Item {
                name: None,
                value: text.clone(),
                comment: self.comment.clone(),
            }],
            EntryValue::Block { style, lines } => {
                let mut out: Vec<Item> = Vec::new();
                if let BlockStyle::Continued(head) = style {
                    let mut joined = head.clone();
                    for l in lines {
                        let (v, _) = split_comment(l.trim());
                        joined.push(' ');
                        joined.push_str(v);
                    }
                    return vec![Item {
                        name: None,
                        value: joined,
                        comment: self.comment.clone(),
                    }];
                }
                for line in lines {
                    let continuation = line.starts_with(char::is_whitespace);
                    let (body, comment) = split_comment(line.trim());
                    if continuation {
                        if let Some(last) = out.last_mut() {
                            if !body.is_empty() {
                                last.value.push(' ');
                                last.value.push_str(body);
                            }
                            continue;
                        }
                    }
                    let body = body.strip_prefix("- ").unwrap_or(body).trim();
                    out.push(Item::from_body(body, comment));
                }
                out
            }
        }
    }
}

/// One interpreted line of an entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub name: Option<String>,
    pub value: String,
    pub comment: Option<String>,
}

impl Item {
    fn from_body(body: &str, comment: Option<String>) -> Self {
        if let Some((k, v)) = body.split_once(':') {
            let k = k.trim();
            if parse::is_key(k) {
                return Item {
                    name: Some(k.to_string()),
                    value: v.trim().to_string(),
                    comment,
                };
            }
        }
        Item {
            name: None,
            value: body.to_string(),
            comment,
        }
    }
}

/// Splits `value # comment`. A `#` only starts a comment at the beginning of
/// the text or after whitespace.
pub(crate) fn split_comment(text: &str) -> (&str, Option<String>) {
    let bytes = text.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'#' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            let comment = text[i + 1..].trim();
            return (text[..i].trim_end(), Some(comment.to_string()));
        }
    }
    (text, None)
}
