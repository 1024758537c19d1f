use thiserror::Error;

use super::{split_comment, BlockStyle, Digest, Entry, EntryValue, Section, SpecDocument};

const HEADER_PREFIX: &str = "# Specification:";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: expected {expected}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
}

fn err(line: usize, column: usize, expected: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        expected: expected.into(),
    }
}

pub(crate) fn is_key(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct PendingEntry {
    key: String,
    head: String,
    comment: Option<String>,
    line: usize,
    raw_lines: Vec<String>,
}

impl PendingEntry {
    fn finish(self) -> Entry {
        let value = if self.raw_lines.is_empty() && self.head != "|" {
            EntryValue::Text { text: self.head }
        } else {
            let indent = self
                .raw_lines
                .iter()
                .map(|l| l.chars().take_while(|c| c.is_whitespace()).count())
                .min()
                .unwrap_or(0);
            let lines = self
                .raw_lines
                .iter()
                .map(|l| l.chars().skip(indent).collect())
                .collect();
            let style = match self.head.as_str() {
                "|" => BlockStyle::Literal,
                "" => BlockStyle::Nested,
                _ => BlockStyle::Continued(self.head),
            };
            EntryValue::Block { style, lines }
        };
        Entry {
            key: self.key,
            value,
            comment: self.comment,
            line: self.line,
        }
    }
}

/// Parses a `spec.md` document.
///
/// Blank lines are insignificant. Full-line `#` comments after the header are
/// skipped. Trailing `# comment` text after a value is split off into
/// [`Entry::comment`]; inside blocks, lines are kept verbatim.
pub fn parse_spec(bytes: &[u8]) -> Result<SpecDocument, ParseError> {
    let source_digest = Digest::of(bytes);
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let prefix = &bytes[..e.valid_up_to()];
        let line = prefix.iter().filter(|&&b| b == b'\n').count() + 1;
        let column = prefix.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
        err(line, column, "valid UTF-8 text")
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);

    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
    let first = lines.next().unwrap_or("").trim_end();
    let title = first
        .trim_start()
        .strip_prefix(HEADER_PREFIX)
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| err(1, 1, "`# Specification: <title>` header"))?
        .to_string();

    let mut sections: Vec<Section> = Vec::new();
    let mut pending: Option<PendingEntry> = None;

    for (idx, raw) in lines.enumerate() {
        let lineno = idx + 2;
        let line = raw.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with(char::is_whitespace) {
            match pending.as_mut() {
                Some(p) => p.raw_lines.push(line.to_string()),
                None => {
                    let col = line.chars().take_while(|c| c.is_whitespace()).count() + 1;
                    return Err(err(lineno, col, "an entry `key: value` before indented lines"));
                }
            }
            continue;
        }
        if line.starts_with('#') {
            if let Some(rest) = line.strip_prefix("##") {
                if rest.starts_with('#') {
                    return Err(err(lineno, 3, "`## <section name>` (deeper headings are not allowed)"));
                }
                let name = rest.trim();
                if !rest.starts_with(' ') || name.is_empty() {
                    return Err(err(lineno, 3, "a section name after `## `"));
                }
                if let Some(p) = pending.take() {
                    sections.last_mut().expect("entry belongs to a section").entries.push(p.finish());
                }
                sections.push(Section {
                    name: name.to_string(),
                    entries: Vec::new(),
                    line: lineno,
                });
            }
            // single `#` lines are comments
            continue;
        }

        let Some(section) = sections.last_mut() else {
            return Err(err(lineno, 1, "a `## <section>` header before entries"));
        };
        let Some((key, rest)) = line.split_once(':') else {
            return Err(err(lineno, line.chars().count() + 1, "`:` after the key"));
        };
        if !is_key(key) {
            let bad = key
                .char_indices()
                .find(|&(i, c)| {
                    !(c.is_ascii_alphanumeric() || c == '_') || (i == 0 && c.is_ascii_digit())
                })
                .map(|(i, _)| key[..i].chars().count() + 1)
                .unwrap_or(1);
            return Err(err(lineno, bad, "a key matching [a-zA-Z_][a-zA-Z0-9_]*"));
        }
        if let Some(p) = pending.take() {
            section.entries.push(p.finish());
        }
        let (value, comment) = split_comment(rest.trim());
        pending = Some(PendingEntry {
            key: key.to_string(),
            head: value.to_string(),
            comment,
            line: lineno,
            raw_lines: Vec::new(),
        });
    }
    if let Some(p) = pending.take() {
        sections.last_mut().expect("entry belongs to a section").entries.push(p.finish());
    }

    Ok(SpecDocument {
        title,
        sections,
        source_digest,
    })
}

/// Canonical text form of a document.
///
/// Re-parsing the output yields the same titles, sections and entries; for
/// documents already in canonical form the bytes (and so the digest) are
/// identical too.
pub fn serialize_spec(doc: &SpecDocument) -> String {
    let mut out = format!("{HEADER_PREFIX} {}\n", doc.title);
    for section in &doc.sections {
        out.push_str("\n## ");
        out.push_str(&section.name);
        out.push('\n');
        for entry in &section.entries {
            let head = match &entry.value {
                EntryValue::Text { text } => text.as_str(),
                EntryValue::Block { style, .. } => match style {
                    BlockStyle::Literal => "|",
                    BlockStyle::Nested => "",
                    BlockStyle::Continued(h) => h.as_str(),
                },
            };
            out.push_str(&entry.key);
            out.push(':');
            if !head.is_empty() {
                out.push(' ');
                out.push_str(head);
            }
            if let Some(c) = &entry.comment {
                out.push_str(" #");
                if !c.is_empty() {
                    out.push(' ');
                    out.push_str(c);
                }
            }
            out.push('\n');
            for l in entry.lines() {
                out.push_str("  ");
                out.push_str(l);
                out.push('\n');
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_header_only() {
        let doc = parse_spec(b"# Specification: Empty").unwrap();
        assert_eq!(doc.title, "Empty");
        assert!(doc.sections.is_empty());
    }

    #[test]
    fn literal_block_round_trips() {
        let src = "# Specification: Blocks\n\n## Equations\nequations: |\n  heat: u_t = kappa * u_xx\n  source: f = 0\n";
        let doc = parse_spec(src.as_bytes()).unwrap();
        let e = &doc.sections[0].entries[0];
        assert_eq!(e.lines().len(), 2);
        assert!(matches!(
            e.value,
            EntryValue::Block { style: BlockStyle::Literal, .. }
        ));
        let again = serialize_spec(&doc);
        assert_eq!(again, src);
        assert_eq!(parse_spec(again.as_bytes()).unwrap(), doc);
    }

    #[test]
    fn header_is_required_on_line_one() {
        let e = parse_spec(b"\n# Specification: Late").unwrap_err();
        assert_eq!((e.line, e.column), (1, 1));
        let e = parse_spec(b"## Domain\ngeometry: square").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(parse_spec(b"# Specification:   ").is_err());
    }

    #[test]
    fn bad_key_reports_column() {
        let e = parse_spec(b"# Specification: X\n## Domain\ngrid size: 10\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert_eq!(e.column, 5);
        let e = parse_spec(b"# Specification: X\n## Domain\n9lives: 10\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 1));
    }

    #[test]
    fn orphan_indented_line_is_rejected() {
        let e = parse_spec(b"# Specification: X\n## Domain\n   stray\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 4));
    }

    #[test]
    fn entry_before_section_is_rejected() {
        let e = parse_spec(b"# Specification: X\nkey: value\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn malformed_headers() {
        assert!(parse_spec(b"# Specification: X\n##Domain\n").is_err());
        assert!(parse_spec(b"# Specification: X\n## \n").is_err());
        assert!(parse_spec(b"# Specification: X\n### Sub\n").is_err());
        assert!(parse_spec(b"# Specification: X\n## Domain\nno colon here\n").is_err());
    }

    #[test]
    fn comments_and_crlf() {
        let src = "# Specification: C\r\n## Domain\r\n# a note\r\npixel_size: 0.7 mm # from LoDoPaB-CT\r\nurl: a#b\r\n";
        let doc = parse_spec(src.as_bytes()).unwrap();
        let e = &doc.sections[0].entries;
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].text(), Some("0.7 mm"));
        assert_eq!(e[0].comment.as_deref(), Some("from LoDoPaB-CT"));
        assert_eq!(e[1].text(), Some("a#b"));
    }

    #[test]
    fn nested_and_continued_blocks() {
        let src = "# Specification: N\n## Observables\nobservables:\n  - PSNR: dB\n  - SSIM: dimensionless [0, 1]\n## Primitives Required\nprimitives: [integrate, solve_linear,\n  optimize, constrain, discretize]\n";
        let doc = parse_spec(src.as_bytes()).unwrap();
        let obs = &doc.sections[0].entries[0];
        assert!(matches!(obs.value, EntryValue::Block { style: BlockStyle::Nested, .. }));
        let items = obs.items();
        assert_eq!(items[0].name.as_deref(), Some("PSNR"));
        assert_eq!(items[1].value, "dimensionless [0, 1]");
        let prim = &doc.sections[1].entries[0];
        assert_eq!(
            prim.items()[0].value,
            "[integrate, solve_linear, optimize, constrain, discretize]"
        );
        let canon = serialize_spec(&doc);
        let again = parse_spec(canon.as_bytes()).unwrap();
        assert_eq!(serialize_spec(&again), canon);
        assert_eq!(again.sections[1].entries[0].value, prim.value);
    }

    #[test]
    fn digest_is_deterministic() {
        let a = parse_spec(b"# Specification: D").unwrap();
        let b = parse_spec(b"# Specification: D").unwrap();
        assert_eq!(a.source_digest, b.source_digest);
        assert_eq!(a.source_digest.to_hex().len(), 64);
        let c = parse_spec(b"# Specification: D ").unwrap();
        assert_ne!(a.source_digest, c.source_digest);
    }

    #[test]
    fn invalid_utf8() {
        let e = parse_spec(b"# Specification: X\n\xff\n").unwrap_err();
        assert_eq!(e.line, 2);
    }
}
