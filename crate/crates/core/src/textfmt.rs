//! Versioned line-oriented text artifacts.
//!
//! Layout:
//!
//! ```text
//! <format-name> schema_version=<n> key=value ...
//! # meta-key=meta-value          (zero or more provenance lines)
//! <body lines>
//! ```
//!
//! Floats are written with `{}` formatting, which is the shortest string that
//! round-trips to the same `f64`.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("expected format {expected:?}, found {found:?}")]
    WrongFormat { expected: String, found: String },
    #[error("{format}: unsupported schema_version {found} (this build reads {expected})")]
    SchemaMismatch { format: String, expected: u32, found: String },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Provenance fields (seed, tool version, input digests) carried by every artifact.
pub type Meta = Vec<(String, String)>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Header {
    pub format: String,
    pub schema_version: u32,
    pub fields: Vec<(String, String)>,
    pub meta: Meta,
}

impl Header {
    pub fn new(format: &str, schema_version: u32) -> Self {
        Header { format: format.to_string(), schema_version, fields: Vec::new(), meta: Vec::new() }
    }

    pub fn field(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn with_meta(mut self, meta: &[(String, String)]) -> Self {
        self.meta.extend(meta.iter().cloned());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, FormatError> {
        let raw = self.get(key).ok_or_else(|| FormatError::Malformed {
            line: 1,
            reason: format!("header is missing {key}"),
        })?;
        raw.parse().map_err(|_| FormatError::Malformed { line: 1, reason: format!("bad header value {key}={raw}") })
    }

    pub fn render(&self) -> String {
        let mut s = format!("{} schema_version={}", self.format, self.schema_version);
        for (k, v) in &self.fields {
            let _ = write!(s, " {k}={v}");
        }
        s.push('\n');
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}={v}");
        }
        s
    }
}

/// A parsed artifact: header plus numbered body lines.
#[derive(Debug)]
pub struct Document<'a> {
    pub header: Header,
    body: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Document<'a> {
    pub fn parse(text: &'a str, format: &str, schema_version: u32) -> Result<Self, FormatError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, first) = lines.next().ok_or(FormatError::Malformed { line: 1, reason: "empty file".into() })?;
        let mut parts = first.split_whitespace();
        let found = parts.next().unwrap_or("");
        if found != format {
            return Err(FormatError::WrongFormat { expected: format.into(), found: found.into() });
        }
        let mut header = Header::new(format, schema_version);
        let mut version_seen = false;
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| FormatError::Malformed {
                line: 1,
                reason: format!("header token {p:?} is not key=value"),
            })?;
            if k == "schema_version" {
                if v.parse::<u32>().ok() != Some(schema_version) {
                    return Err(FormatError::SchemaMismatch {
                        format: format.into(),
                        expected: schema_version,
                        found: v.into(),
                    });
                }
                version_seen = true;
            } else {
                header.fields.push((k.to_string(), v.to_string()));
            }
        }
        if !version_seen {
            return Err(FormatError::SchemaMismatch {
                format: format.into(),
                expected: schema_version,
                found: "missing".into(),
            });
        }
        let mut body = Vec::new();
        for (n, l) in lines {
            if let Some(m) = l.strip_prefix('#') {
                if let Some((k, v)) = m.trim().split_once('=') {
                    header.meta.push((k.to_string(), v.to_string()));
                }
            } else if !l.trim().is_empty() {
                body.push((n, l));
            }
        }
        Ok(Document { header, body, pos: 0 })
    }

    /// Next body line with its 1-based line number.
    pub fn next_line(&mut self) -> Result<(usize, &'a str), FormatError> {
        let item = self.body.get(self.pos).copied().ok_or(FormatError::Malformed {
            line: self.body.last().map_or(1, |(n, _)| n + 1),
            reason: "unexpected end of file".into(),
        })?;
        self.pos += 1;
        Ok(item)
    }

    /// Next body line split on whitespace, checking its leading keyword.
    pub fn expect(&mut self, keyword: &str) -> Result<(usize, Vec<&'a str>), FormatError> {
        let (n, l) = self.next_line()?;
        let mut parts: Vec<&str> = l.split_whitespace().collect();
        if parts.first() != Some(&keyword) {
            return Err(FormatError::Malformed { line: n, reason: format!("expected {keyword:?} line") });
        }
        parts.remove(0);
        Ok((n, parts))
    }

    pub fn remaining(&self) -> usize {
        self.body.len() - self.pos
    }
}

pub fn parse_num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T, FormatError> {
    s.parse().map_err(|_| FormatError::Malformed { line, reason: format!("cannot parse {s:?}") })
}

pub fn parse_floats(parts: &[&str], line: usize) -> Result<Vec<f64>, FormatError> {
    parts.iter().map(|p| parse_num(p, line)).collect()
}

/// Space-joined shortest round-trip floats.
pub fn join_floats(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 8);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let h = Header::new("riskminer-test", 3)
            .field("V", 10)
            .with_meta(&[("seed".into(), "42".into())]);
        let text = format!("{}row 1 2\n", h.render());
        let mut doc = Document::parse(&text, "riskminer-test", 3).unwrap();
        assert_eq!(doc.header.get("V"), Some("10"));
        assert_eq!(doc.header.meta, vec![("seed".to_string(), "42".to_string())]);
        let (_, parts) = doc.expect("row").unwrap();
        assert_eq!(parts, vec!["1", "2"]);
        assert!(doc.next_line().is_err());
    }

    #[test]
    fn schema_mismatch_fails_loudly() {
        let text = "riskminer-test schema_version=2\n";
        assert!(matches!(
            Document::parse(text, "riskminer-test", 1),
            Err(FormatError::SchemaMismatch { .. })
        ));
        assert!(matches!(
            Document::parse("other schema_version=1\n", "riskminer-test", 1),
            Err(FormatError::WrongFormat { .. })
        ));
    }

    #[test]
    fn floats_round_trip_exactly() {
        let v = [0.1, -1.0 / 3.0, 1e-300, 12345.678];
        let s = join_floats(&v);
        let parts: Vec<&str> = s.split(' ').collect();
        assert_eq!(parse_floats(&parts, 1).unwrap(), v);
    }
}
