use super::prompts::{self, PLAN_FORMAT};
use super::{with_retries, PipelineConfig, PipelineError, Provider, Stage};
use crate::docspec::{parse_docspec, DocSpec};
use crate::report::ValidationReport;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub spec: DocSpec,
    pub attempts: usize,
    /// Reports of the rejected attempts, oldest first.
    pub reports: Vec<ValidationReport>,
}

/// Asks the provider for a DocSpec and accepts the first reply that passes
/// full validation, including the static check of every unit.
pub fn plan(topic: &str, provider: &dyn Provider, config: &PipelineConfig) -> Result<PlanOutcome, PipelineError> {
    config.check()?;
    let topic = topic.trim();
    if topic.is_empty() {
        return Err(PipelineError::Config("topic must not be empty".into()));
    }
    let key = super::slug(topic);
    let out = with_retries(
        provider,
        Stage::Plan,
        &key,
        config.max_attempts,
        |fb| {
            prompts::render(
                prompts::template(Stage::Plan),
                &[("topic", topic), ("schema", PLAN_FORMAT.trim_end()), ("feedback", fb)],
            )
        },
        parse_docspec,
    )?;
    match out.value {
        Some(spec) => Ok(PlanOutcome {
            spec,
            attempts: out.attempts,
            reports: out.reports,
        }),
        None => Err(PipelineError::PlanFailed {
            attempts: out.attempts,
            reports: out.reports,
        }),
    }
}
