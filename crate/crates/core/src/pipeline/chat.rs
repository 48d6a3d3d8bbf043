use serde::{Deserialize, Serialize};

use super::prompts::{self, CHAT_FORMAT};
use super::{parse_json_reply, with_retries, PipelineConfig, PipelineError, Provider, Stage};
use crate::docspec::{serialize_docspec, DocSpec, DocSpecDiff};
use crate::report::{ValidationReport, ViolationKind};

/// A proposed edit. Nothing is applied until the caller accepts it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatProposal {
    pub explanation: String,
    pub diff: DocSpecDiff,
    pub attempts: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Reply {
    explanation: String,
    diff: DocSpecDiff,
}

/// Asks the provider to turn an edit request into a diff against `spec`.
/// The reply must decode as a diff; whether it applies cleanly is checked
/// on acceptance.
pub fn chat_edit(
    spec: &DocSpec,
    message: &str,
    provider: &dyn Provider,
    config: &PipelineConfig,
) -> Result<ChatProposal, PipelineError> {
    config.check()?;
    let message = message.trim();
    if message.is_empty() {
        return Err(PipelineError::Config("message must not be empty".into()));
    }
    let current = serialize_docspec(spec);
    let out = with_retries(
        provider,
        Stage::Chat,
        &super::slug(message),
        config.max_attempts,
        |fb| {
            prompts::render(
                prompts::template(Stage::Chat),
                &[
                    ("docspec", current.trim_end()),
                    ("message", message),
                    ("schema", CHAT_FORMAT.trim_end()),
                    ("feedback", fb),
                ],
            )
        },
        |reply| {
            let json = parse_json_reply(reply)?;
            serde_json::from_value::<Reply>(json).map_err(|e| {
                let mut r = ValidationReport::new();
                r.add(ViolationKind::Schema, "", format!("not a diff proposal: {e}"));
                r
            })
        },
    )?;
    match out.value {
        Some(reply) => Ok(ChatProposal {
            explanation: reply.explanation,
            diff: reply.diff,
            attempts: out.attempts,
        }),
        None => Err(PipelineError::ChatFailed {
            attempts: out.attempts,
            reports: out.reports,
        }),
    }
}
