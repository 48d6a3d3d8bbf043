//! Path-anchored validation reports shared by every checker in the crate.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Broad class of a violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// The document is not well-formed (bad JSON, bad HTML).
    Syntax,
    /// Missing, extra, or mistyped fields.
    Schema,
    /// A well-formed document breaks an invariant.
    Semantic,
    /// An expression failed to parse or type-check.
    Expression,
    /// Fragment or widget policy violation.
    Policy,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Syntax => "syntax",
            ViolationKind::Schema => "schema",
            ViolationKind::Semantic => "semantic",
            ViolationKind::Expression => "expression",
            ViolationKind::Policy => "policy",
        };
        f.write_str(s)
    }
}

/// One problem found by a checker.
///
/// `path` is a JSON-pointer-style location (`/units/0/interaction/state/1/max`)
/// for structured documents. For text inputs (HTML fragments, expression
/// sources) `offset` carries the byte position instead, and `path` may be empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub path: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
}

impl Violation {
    pub fn new(kind: ViolationKind, path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            kind,
            path: path.into(),
            message: message.into(),
            offset: None,
        }
    }

    pub fn at_offset(mut self, offset: usize) -> Self {
        self.offset = Some(offset);
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "/" } else { &self.path };
        write!(f, "{} error at {}", self.kind, path)?;
        if let Some(off) = self.offset {
            write!(f, " (byte {off})")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// An ordered list of violations; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    pub fn add(&mut self, kind: ViolationKind, path: impl Into<String>, message: impl Into<String>) {
        self.push(Violation::new(kind, path, message));
    }

    /// Appends `other`, prefixing each of its paths with `prefix`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: ValidationReport) {
        for mut v in other.violations {
            v.path = format!("{prefix}{}", v.path);
            self.violations.push(v);
        }
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter()
    }

    /// True if some violation's message contains `needle`.
    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl FromIterator<Violation> for ValidationReport {
    fn from_iter<I: IntoIterator<Item = Violation>>(iter: I) -> Self {
        ValidationReport {
            violations: iter.into_iter().collect(),
        }
    }
}

/// Escapes one JSON-pointer reference token.
pub fn pointer_token(s: &str) -> String {
    s.replace('~', "~0").replace('/', "~1")
}
