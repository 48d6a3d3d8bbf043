use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::document::Document;
use super::prompts::{self, COHERENCE_FORMAT};
use super::{parse_json_reply, with_retries, GeneratedUnit, PipelineConfig, Provider, Stage, UnitStatus};
use crate::docspec::DocSpec;
use crate::html::{extract_text, validate_fragment};
use crate::report::{ValidationReport, ViolationKind};
use crate::verify::{plan_sweep, verify_constraint, VerificationReport, VerificationStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueNote {
    /// Unit the issue is anchored to; `None` for document-wide notes.
    pub unit: Option<String>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coherence {
    /// 1 (disjointed) to 5 (flows naturally).
    pub score: u8,
    pub issues: Vec<IssueNote>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitCompleteness {
    pub unit: String,
    pub pass: bool,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintOutcome {
    pub unit: String,
    pub report: VerificationReport,
}

/// A stage of one unit that should be generated again.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Directive {
    pub unit: String,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Advisory only; never affects the verdict.
    pub coherence: Option<Coherence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence_error: Option<String>,
    pub coherence_attempts: usize,
    pub completeness: Vec<UnitCompleteness>,
    pub constraints: Vec<ConstraintOutcome>,
    pub verdict: Verdict,
    pub directives: Vec<Directive>,
}

impl EvaluationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

fn parse_coherence(reply: &str, unit_ids: &BTreeSet<&str>) -> Result<Coherence, ValidationReport> {
    let json = parse_json_reply(reply)?;
    let mut r = ValidationReport::new();
    let score = match json.get("score").and_then(serde_json::Value::as_u64) {
        Some(s @ 1..=5) => s as u8,
        _ => {
            r.add(ViolationKind::Schema, "/score", "score must be an integer from 1 to 5");
            0
        }
    };
    let mut issues = Vec::new();
    match json.get("issues").map(|v| v.as_array()) {
        None => {}
        Some(None) => r.add(ViolationKind::Schema, "/issues", "issues must be an array"),
        Some(Some(items)) => {
            for (i, item) in items.iter().enumerate() {
                let path = format!("/issues/{i}");
                let note = item.get("note").and_then(|n| n.as_str());
                let unit = match item.get("unit") {
                    None | Some(serde_json::Value::Null) => Ok(None),
                    Some(serde_json::Value::String(u)) if unit_ids.contains(u.as_str()) => Ok(Some(u.clone())),
                    Some(serde_json::Value::String(u)) => Err(format!("unknown unit '{u}'")),
                    Some(_) => Err("unit must be a string or null".to_string()),
                };
                match (unit, note) {
                    (Ok(unit), Some(note)) => issues.push(IssueNote {
                        unit,
                        note: note.to_string(),
                    }),
                    (Err(m), _) => r.add(ViolationKind::Schema, format!("{path}/unit"), m),
                    (_, None) => r.add(ViolationKind::Schema, format!("{path}/note"), "note must be a string"),
                }
            }
        }
    }
    if r.is_empty() {
        Ok(Coherence { score, issues })
    } else {
        Err(r)
    }
}

fn coherence_prompt(spec: &DocSpec, units: &[GeneratedUnit], feedback: &str) -> String {
    let mut sections = String::new();
    for unit in &spec.units {
        let text = units
            .iter()
            .find(|g| g.unit_id == unit.id)
            .and_then(|g| g.text_fragment.as_deref())
            .map(extract_text)
            .unwrap_or_else(|| "(missing)".into());
        sections.push_str(&format!("[{}] {}\n{}\n\n", unit.id, unit.summary, text));
    }
    prompts::render(
        prompts::template(Stage::Coherence),
        &[
            ("topic", &spec.topic),
            ("sections", sections.trim_end()),
            ("schema", COHERENCE_FORMAT.trim_end()),
            ("feedback", feedback),
        ],
    )
}

/// Checks a generated document. Completeness and constraint verification
/// gate the verdict; the coherence rating is advisory.
pub fn evaluate(
    doc: &Document,
    units: &[GeneratedUnit],
    spec: &DocSpec,
    provider: &dyn Provider,
    config: &PipelineConfig,
) -> EvaluationReport {
    let mut directives: BTreeSet<Directive> = BTreeSet::new();
    let order = doc.section_order();
    let directive = |unit: &str, stage| Directive {
        unit: unit.to_string(),
        stage,
    };

    let mut completeness = Vec::new();
    for unit in &spec.units {
        let mut reasons = Vec::new();
        let mut text_bad = false;
        let mut widget_bad = false;
        match units.iter().find(|g| g.unit_id == unit.id) {
            None => {
                reasons.push("unit was not generated".to_string());
                text_bad = true;
                widget_bad = true;
            }
            Some(g) => {
                if g.status != UnitStatus::Ok {
                    reasons.extend(g.failure_reasons.iter().cloned());
                }
                match &g.text_fragment {
                    None => {
                        reasons.push("text fragment missing".into());
                        text_bad = true;
                    }
                    Some(t) => {
                        let r = validate_fragment(t, &config.policy);
                        if !r.is_empty() {
                            reasons.push(format!("text fragment invalid: {r}"));
                            text_bad = true;
                        }
                    }
                }
                match &g.widget_fragment {
                    None => {
                        reasons.push("widget fragment missing".into());
                        widget_bad = true;
                    }
                    Some(w) => {
                        let r = validate_fragment(w, &config.policy);
                        if !r.is_empty() {
                            reasons.push(format!("widget fragment invalid: {r}"));
                            widget_bad = true;
                        }
                    }
                }
                if g.status != UnitStatus::Ok && !text_bad && !widget_bad {
                    text_bad = true;
                    widget_bad = true;
                }
            }
        }
        let sections = order.iter().filter(|id| **id == unit.id).count();
        if sections != 1 {
            reasons.push(format!("document has {sections} sections for this unit"));
        }
        if text_bad {
            directives.insert(directive(&unit.id, Stage::Text));
        }
        if widget_bad {
            directives.insert(directive(&unit.id, Stage::Widget));
        }
        completeness.push(UnitCompleteness {
            unit: unit.id.clone(),
            pass: reasons.is_empty(),
            reasons,
        });
    }

    let mut constraints = Vec::new();
    let mut violated = false;
    for (unit, entry) in spec.units.iter().zip(completeness.iter_mut()) {
        let plan = plan_sweep(&unit.interaction, config.grid_points, config.cap);
        match verify_constraint(&unit.interaction, &plan) {
            Ok(report) => {
                if report.status == VerificationStatus::Violated {
                    violated = true;
                    directives.insert(directive(&unit.id, Stage::Widget));
                }
                constraints.push(ConstraintOutcome {
                    unit: unit.id.clone(),
                    report,
                });
            }
            Err(e) => {
                entry.pass = false;
                entry.reasons.push(format!("constraint could not be verified: {e}"));
                directives.insert(directive(&unit.id, Stage::Widget));
            }
        }
    }

    let unit_ids: BTreeSet<&str> = spec.units.iter().map(|u| u.id.as_str()).collect();
    let key = super::slug(&spec.topic);
    let (coherence, coherence_error, coherence_attempts) = match with_retries(
        provider,
        Stage::Coherence,
        &key,
        config.max_attempts,
        |fb| coherence_prompt(spec, units, fb),
        |reply| parse_coherence(reply, &unit_ids),
    ) {
        Ok(out) => {
            let err = out
                .value
                .is_none()
                .then(|| format!("no valid rating after {} attempts", out.attempts));
            (out.value, err, out.attempts)
        }
        Err(e) => (None, Some(e.to_string()), 0),
    };

    let complete = completeness.iter().all(|c| c.pass);
    EvaluationReport {
        coherence,
        coherence_error,
        coherence_attempts,
        verdict: if complete && !violated { Verdict::Pass } else { Verdict::Fail },
        completeness,
        constraints,
        directives: directives.into_iter().collect(),
    }
}

/// Directives for the units whose content differs between two revisions.
pub fn directives_for_changed_units(old: &DocSpec, new: &DocSpec) -> Vec<Directive> {
    let mut out = Vec::new();
    for unit in &new.units {
        if old.unit(&unit.id) != Some(unit) {
            for stage in [Stage::Text, Stage::Widget] {
                out.push(Directive {
                    unit: unit.id.clone(),
                    stage,
                });
            }
        }
    }
    out
}
