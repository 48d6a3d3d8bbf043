use super::document::Document;
use super::prompts;
use super::{with_retries, PipelineConfig, PipelineError, Provider, Stage};
use crate::html::validate_page;

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveOutcome {
    pub document: Document,
    pub attempts: usize,
}

/// Single-call baseline: the provider writes the whole page, which is only
/// checked as HTML. No plan, no per-unit stages, no constraint checks.
pub fn run_naive(topic: &str, provider: &dyn Provider, config: &PipelineConfig) -> Result<NaiveOutcome, PipelineError> {
    config.check()?;
    let topic = topic.trim();
    if topic.is_empty() {
        return Err(PipelineError::Config("topic must not be empty".into()));
    }
    let out = with_retries(
        provider,
        Stage::Naive,
        &super::slug(topic),
        config.max_attempts,
        |fb| prompts::render(prompts::template(Stage::Naive), &[("topic", topic), ("feedback", fb)]),
        |reply| {
            let r = validate_page(reply, &config.policy);
            if r.is_empty() {
                Ok(reply.to_string())
            } else {
                Err(r)
            }
        },
    )?;
    match out.value {
        Some(html) => {
            let mut html = html;
            if !html.ends_with('\n') {
                html.push('\n');
            }
            Ok(NaiveOutcome {
                document: Document {
                    title: topic.to_string(),
                    html,
                    unit_ids: Vec::new(),
                },
                attempts: out.attempts,
            })
        }
        None => Err(PipelineError::NaiveFailed {
            attempts: out.attempts,
            reports: out.reports,
        }),
    }
}
