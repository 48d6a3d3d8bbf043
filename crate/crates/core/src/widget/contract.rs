use std::collections::BTreeSet;

use serde::Serialize;

use crate::docspec::{Control, InteractionSpec};
use crate::html::{tokenize, validate_fragment, Attr, FragmentPolicy, Token};
use crate::report::{ValidationReport, ViolationKind};

const POINTER_EVENTS: &[&str] = &["pointerdown", "mousedown", "touchstart"];
const NETWORK_APIS: &[&str] = &["fetch", "XMLHttpRequest", "WebSocket", "EventSource", "importScripts", "sendBeacon"];

/// What the structural census found in a fragment.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ContractCensus {
    pub inputs: usize,
    pub selects: usize,
    pub pointer_handlers: usize,
    pub identifiers: BTreeSet<String>,
}

/// Identifier-like tokens in script text, string contents included, so
/// `s["ratio"]` and `ratio` both count as references to `ratio`.
pub fn script_identifiers(script: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let bytes = script.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                i += 1;
            }
            out.insert(script[start..i].to_string());
        } else if c.is_ascii_digit() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.') {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    out
}

fn census(source: &str) -> (ContractCensus, String) {
    let (tokens, _) = tokenize(source);
    let mut c = ContractCensus::default();
    let mut scripts = String::new();
    let mut in_script = false;
    for t in &tokens {
        match t {
            Token::Start {
                name,
                attrs,
                self_closing,
                ..
            } => match name.as_str() {
                "input" if Attr::get(attrs, "type").map(str::to_ascii_lowercase).as_deref() != Some("hidden") => {
                    c.inputs += 1;
                }
                "select" => c.selects += 1,
                "script" => in_script = !self_closing,
                _ => {}
            },
            Token::End { name, .. } if name == "script" => in_script = false,
            Token::Text { text, raw: true, .. } if in_script => {
                scripts.push_str(text);
                scripts.push('\n');
            }
            _ => {}
        }
    }
    c.identifiers = script_identifiers(&scripts);
    c.pointer_handlers = POINTER_EVENTS.iter().map(|e| scripts.matches(e).count()).sum();
    (c, scripts)
}

/// Structural contract for a widget fragment realizing `spec`: a valid
/// single-root fragment, no external resources or network access, every
/// state variable referenced in the script, and one control per controllable.
pub fn validate_widget_contract(fragment_source: &str, spec: &InteractionSpec) -> ValidationReport {
    let mut r = validate_fragment(fragment_source, &FragmentPolicy::default());
    let (c, scripts) = census(fragment_source);

    for scheme in ["http://", "https://"] {
        if let Some(pos) = scripts.find(scheme) {
            let end = scripts[pos..]
                .find(|ch: char| ch.is_whitespace() || matches!(ch, '"' | '\'' | ')' | '`'))
                .map_or(scripts.len(), |e| pos + e);
            r.add(
                ViolationKind::Policy,
                "/script",
                format!("external resource {} referenced from script", &scripts[pos..end]),
            );
        }
    }
    for api in NETWORK_APIS {
        if c.identifiers.contains(*api) {
            r.add(ViolationKind::Policy, "/script", format!("network access via {api}"));
        }
    }

    for v in &spec.state {
        if !c.identifiers.contains(&v.name) {
            r.add(
                ViolationKind::Semantic,
                "/script",
                format!("state variable {} not referenced", v.name),
            );
        }
    }

    let mut expected_inputs = 0;
    let mut expected_drags = 0;
    for v in spec.controllables() {
        match v.control {
            Control::Drag { .. } => expected_drags += 1,
            _ => expected_inputs += 1,
        }
    }
    let found = c.inputs + c.selects;
    if found != expected_inputs {
        r.add(
            ViolationKind::Semantic,
            "/",
            format!("expected {expected_inputs} input/select controls for the controllable variables, found {found}"),
        );
    }
    if c.pointer_handlers < expected_drags {
        r.add(
            ViolationKind::Semantic,
            "/script",
            format!(
                "expected pointer handlers for {expected_drags} drag variables, found {}",
                c.pointer_handlers
            ),
        );
    }
    r
}

/// The census alone, for reports and debugging.
pub fn contract_census(fragment_source: &str) -> ContractCensus {
    census(fragment_source).0
}
