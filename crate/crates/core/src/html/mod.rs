//! Strict validation of generated HTML fragments and pages.
//!
//! Fragments must be well formed (balanced, properly nested, void elements
//! unclosed), have a single root element, use only allowlisted tags, carry no
//! event-handler attributes and reference no external resources.

mod tokenizer;

pub use tokenizer::{decode_entities, is_void, tokenize, Attr, LexError, Token, VOID_ELEMENTS};

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::report::{ValidationReport, Violation, ViolationKind};

const DEFAULT_POLICY: &str = include_str!("../../data/fragment_policy.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FragmentPolicy {
    pub allowed_tags: BTreeSet<String>,
    #[serde(default)]
    pub forbidden_attribute_prefixes: Vec<String>,
    #[serde(default)]
    pub forbidden_attributes: Vec<String>,
    #[serde(default)]
    pub url_attributes: Vec<String>,
    /// Extra tags permitted when validating a whole page.
    #[serde(default)]
    pub page_tags: BTreeSet<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("cannot read policy {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid policy: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("policy allowlist is empty")]
    EmptyAllowlist,
}

impl Default for FragmentPolicy {
    fn default() -> Self {
        FragmentPolicy::from_json(DEFAULT_POLICY).expect("bundled policy is valid")
    }
}

impl FragmentPolicy {
    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let mut p: FragmentPolicy = serde_json::from_str(text)?;
        if p.allowed_tags.is_empty() {
            return Err(PolicyError::EmptyAllowlist);
        }
        p.allowed_tags = p.allowed_tags.iter().map(|t| t.to_ascii_lowercase()).collect();
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path).map_err(|source| PolicyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    pub fn allows_tag(&self, tag: &str) -> bool {
        self.allowed_tags.contains(tag)
    }

    fn forbids_attribute(&self, name: &str) -> bool {
        self.forbidden_attributes.iter().any(|a| a == name)
            || self
                .forbidden_attribute_prefixes
                .iter()
                .any(|p| name.starts_with(p.as_str()) && name.len() > p.len())
    }

    fn page_variant(&self) -> FragmentPolicy {
        let mut p = self.clone();
        p.allowed_tags.extend(self.page_tags.iter().cloned());
        p
    }
}

/// Escapes text for element content and double-quoted attribute values.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// True for URLs that leave the document: absolute web URLs,
/// protocol-relative URLs and script URLs.
pub fn is_external_url(value: &str) -> bool {
    let v = value.trim().to_ascii_lowercase();
    ["http:", "https:", "//", "javascript:", "ftp:", "ws:", "wss:"]
        .iter()
        .any(|p| v.starts_with(p))
}

/// Finds `url(...)` or `@import` references to external resources in CSS text.
fn css_external(css: &str) -> Option<String> {
    let lower = css.to_ascii_lowercase();
    if lower.contains("@import") {
        return Some("@import".into());
    }
    let mut rest = lower.as_str();
    while let Some(i) = rest.find("url(") {
        let arg = rest[i + 4..].trim_start().trim_start_matches(['"', '\'']);
        if is_external_url(arg) {
            let end = arg.find([')', '"', '\'']).unwrap_or(arg.len());
            return Some(arg[..end].to_string());
        }
        rest = &rest[i + 4..];
    }
    None
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Fragment,
    Page,
}

fn crumb(stack: &[(String, usize)]) -> String {
    if stack.is_empty() {
        "/".to_string()
    } else {
        stack.iter().map(|(n, _)| format!("/{n}")).collect()
    }
}

fn check(source: &str, policy: &FragmentPolicy, mode: Mode) -> ValidationReport {
    let mut r = ValidationReport::new();
    let (tokens, lex_errors) = tokenize(source);
    for e in lex_errors {
        r.push(Violation::new(ViolationKind::Syntax, "/", e.message).at_offset(e.offset));
    }

    let mut stack: Vec<(String, usize)> = Vec::new();
    let mut roots: Vec<(String, usize)> = Vec::new();
    let mut seen_element = false;
    let mut has_body = false;
    for t in &tokens {
        match t {
            Token::Doctype { offset } => {
                if mode == Mode::Fragment || seen_element {
                    r.push(
                        Violation::new(ViolationKind::Syntax, "/", "doctype is only allowed at the start of a page")
                            .at_offset(*offset),
                    );
                }
            }
            Token::Comment { .. } => {}
            Token::Text { text, raw, offset } => {
                let parent = stack.last().map(|(n, _)| n.as_str());
                if stack.is_empty() && !text.trim().is_empty() {
                    r.push(
                        Violation::new(ViolationKind::Syntax, "/", "text outside the root element")
                            .at_offset(*offset),
                    );
                }
                if *raw && parent == Some("style") {
                    if let Some(url) = css_external(text) {
                        r.push(
                            Violation::new(
                                ViolationKind::Policy,
                                crumb(&stack),
                                format!("external resource {url} in style"),
                            )
                            .at_offset(*offset),
                        );
                    }
                }
            }
            Token::Start {
                name,
                attrs,
                self_closing,
                offset,
            } => {
                seen_element = true;
                if stack.is_empty() {
                    roots.push((name.clone(), *offset));
                }
                let path = format!("{}{}", crumb(&stack).trim_end_matches('/'), format_args!("/{name}"));
                if name == "body" {
                    has_body = true;
                }
                if !policy.allows_tag(name) {
                    r.push(
                        Violation::new(ViolationKind::Policy, path.clone(), format!("tag {name} is not allowed"))
                            .at_offset(*offset),
                    );
                }
                for a in attrs {
                    if policy.forbids_attribute(&a.name) {
                        r.push(
                            Violation::new(
                                ViolationKind::Policy,
                                path.clone(),
                                format!("forbidden attribute {}", a.name),
                            )
                            .at_offset(a.offset),
                        );
                        continue;
                    }
                    let value = a.value.as_deref().unwrap_or("");
                    let is_url_attr = policy.url_attributes.contains(&a.name);
                    let external = if name == "script" && a.name == "src" {
                        true
                    } else if is_url_attr {
                        is_external_url(value)
                    } else if a.name == "style" {
                        css_external(value).is_some()
                    } else {
                        false
                    };
                    if external {
                        r.push(
                            Violation::new(
                                ViolationKind::Policy,
                                path.clone(),
                                format!("external resource {}=\"{}\"", a.name, value),
                            )
                            .at_offset(a.offset),
                        );
                    }
                }
                if !self_closing && !is_void(name) {
                    stack.push((name.clone(), *offset));
                }
            }
            Token::End { name, offset } => {
                if is_void(name) {
                    r.push(
                        Violation::new(
                            ViolationKind::Syntax,
                            crumb(&stack),
                            format!("void element {name} cannot have a closing tag"),
                        )
                        .at_offset(*offset),
                    );
                    continue;
                }
                match stack.last() {
                    Some((top, _)) if top == name => {
                        stack.pop();
                    }
                    Some((top, _)) => {
                        r.push(
                            Violation::new(
                                ViolationKind::Syntax,
                                crumb(&stack),
                                format!("mismatched closing tag {top}: expected </{top}>, found </{name}>"),
                            )
                            .at_offset(*offset),
                        );
                        if let Some(pos) = stack.iter().rposition(|(n, _)| n == name) {
                            stack.truncate(pos);
                        }
                    }
                    None => r.push(
                        Violation::new(
                            ViolationKind::Syntax,
                            "/",
                            format!("mismatched closing tag {name}: no open element"),
                        )
                        .at_offset(*offset),
                    ),
                }
            }
        }
    }
    for (name, offset) in stack.iter().rev() {
        r.push(
            Violation::new(ViolationKind::Syntax, crumb(&stack), format!("unclosed element {name}"))
                .at_offset(*offset),
        );
    }
    match roots.as_slice() {
        [] => r.add(ViolationKind::Syntax, "/", "expected exactly one root element, found 0"),
        [(root, offset)] => {
            if mode == Mode::Page && root != "html" {
                r.push(
                    Violation::new(ViolationKind::Syntax, "/", format!("page root must be html, found {root}"))
                        .at_offset(*offset),
                );
            }
        }
        [_, (_, second), ..] => r.push(
            Violation::new(
                ViolationKind::Syntax,
                "/",
                format!("expected exactly one root element, found {}", roots.len()),
            )
            .at_offset(*second),
        ),
    }
    if mode == Mode::Page && !has_body && !roots.is_empty() {
        r.add(ViolationKind::Syntax, "/html", "page has no body element");
    }
    r
}

/// Validates a fragment: well-formedness, a single root and `policy`.
pub fn validate_fragment(source: &str, policy: &FragmentPolicy) -> ValidationReport {
    check(source, policy, Mode::Fragment)
}

/// Validates a complete page: optional doctype, then a single `html` root
/// containing a body. Page-level tags are added to the allowlist.
pub fn validate_page(source: &str, policy: &FragmentPolicy) -> ValidationReport {
    check(source, &policy.page_variant(), Mode::Page)
}

const BLOCK_TAGS: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "br", "caption", "dd", "details", "div",
    "dl", "dt", "figcaption", "figure", "footer", "h1", "h2", "h3", "h4", "h5", "h6", "head",
    "header", "hr", "html", "li", "main", "nav", "ol", "p", "pre", "section", "summary", "table",
    "td", "th", "title", "tr", "ul",
];

/// Plain text of a fragment: block elements become paragraphs separated by
/// blank lines, whitespace is collapsed, and script/style bodies are dropped.
pub fn extract_text(source: &str) -> String {
    let (tokens, _) = tokenize(source);
    let mut blocks: Vec<String> = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, blocks: &mut Vec<String>| {
        let collapsed = cur.split_whitespace().collect::<Vec<_>>().join(" ");
        if !collapsed.is_empty() {
            blocks.push(collapsed);
        }
        cur.clear();
    };
    let mut skip_depth = 0usize;
    for t in &tokens {
        match t {
            Token::Start {
                name, self_closing, ..
            } => {
                if matches!(name.as_str(), "script" | "style") && !self_closing {
                    skip_depth += 1;
                } else if BLOCK_TAGS.contains(&name.as_str()) {
                    flush(&mut cur, &mut blocks);
                }
            }
            Token::End { name, .. } => {
                if matches!(name.as_str(), "script" | "style") {
                    skip_depth = skip_depth.saturating_sub(1);
                } else if BLOCK_TAGS.contains(&name.as_str()) {
                    flush(&mut cur, &mut blocks);
                }
            }
            Token::Text { text, raw, .. } => {
                if skip_depth == 0 && !raw {
                    cur.push_str(&decode_entities(text));
                }
            }
            Token::Comment { .. } | Token::Doctype { .. } => {}
        }
    }
    flush(&mut cur, &mut blocks);
    blocks.join("\n\n")
}
