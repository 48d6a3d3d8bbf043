//! Planner, executor and evaluator over a pluggable text-generation provider.
//!
//! Every provider reply is re-validated locally. A rejected reply is retried
//! with the validation report appended to the prompt, at most
//! [`PipelineConfig::max_attempts`] calls per unit and stage.

mod chat;
mod compare;
mod document;
mod evaluator;
mod executor;
mod http;
mod naive;
mod planner;
mod prompts;
mod provider;
mod scripted;
mod source;
mod transcript;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use chat::{chat_edit, ChatProposal};
pub use compare::{
    compare, run_pipeline, write_run_artifacts, ArmSummary, ComparisonSummary, RunOutcome, DOCSPEC_FILE, DOCUMENT_FILE,
    EVALUATION_FILE, SUMMARY_FILE, VERIFICATION_FILE,
};
pub(crate) use compare::pretty_json;
pub use document::{assemble_document, Document, GenerationMetadata, UnitMetadata, METADATA_ELEMENT_ID};
pub use evaluator::{
    directives_for_changed_units, evaluate, Coherence, ConstraintOutcome, Directive, EvaluationReport, IssueNote, UnitCompleteness, Verdict,
};
pub use executor::{
    build_context, container_id, execute, execute_unit_text, execute_unit_widget, execute_with, reexecute,
    Execution, Progress, TextOutcome, WidgetOutcome,
};
pub use http::{HttpConfig, HttpProvider};
pub use naive::{run_naive, NaiveOutcome};
pub use planner::{plan, PlanOutcome};
pub use prompts::{NO_PRIOR_SECTIONS, PROMPT_VERSION};
pub use provider::{slug, strip_code_fence, CompletionRequest, Provider, ProviderError, Stage};
pub use scripted::{fault_output, AuditEntry, ScriptedProvider};
pub use source::ProviderSource;
pub use transcript::TranscriptProvider;

use crate::html::FragmentPolicy;
use crate::report::ValidationReport;
use crate::verify::{DEFAULT_CAP, DEFAULT_GRID_POINTS};
use crate::widget::CompileError;

pub const DEFAULT_MAX_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WidgetMode {
    /// Ask the provider, falling back to the compiler on exhaustion.
    Llm,
    /// Compile the interaction spec directly.
    Deterministic,
}

impl WidgetMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WidgetMode::Llm => "llm",
            WidgetMode::Deterministic => "deterministic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Provider calls allowed per unit and stage (k).
    pub max_attempts: usize,
    /// Generate text in unit order, each unit seeing the prose before it.
    pub sequential_text: bool,
    pub widget_mode: WidgetMode,
    /// Run widget stages on worker threads.
    pub parallel_widgets: bool,
    pub grid_points: usize,
    pub cap: usize,
    pub policy: FragmentPolicy,
    /// Widget container ids are `{seed}-{unit position}`.
    pub container_seed: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            sequential_text: true,
            widget_mode: WidgetMode::Deterministic,
            parallel_widgets: true,
            grid_points: DEFAULT_GRID_POINTS,
            cap: DEFAULT_CAP,
            policy: FragmentPolicy::default(),
            container_seed: "w".into(),
        }
    }
}

impl PipelineConfig {
    pub fn check(&self) -> Result<(), PipelineError> {
        if self.max_attempts == 0 {
            return Err(PipelineError::Config("max_attempts must be at least 1".into()));
        }
        if self.cap == 0 {
            return Err(PipelineError::Config("sweep cap must be at least 1".into()));
        }
        if !crate::widget::is_container_id(&self.container_seed) {
            return Err(PipelineError::Config(format!(
                "container seed '{}' must be a letter followed by letters, digits, '-' or '_'",
                self.container_seed
            )));
        }
        Ok(())
    }
}

/// One provider per stage.
#[derive(Clone)]
pub struct Providers {
    pub plan: Arc<dyn Provider>,
    pub text: Arc<dyn Provider>,
    pub widget: Arc<dyn Provider>,
    pub coherence: Arc<dyn Provider>,
    pub naive: Arc<dyn Provider>,
    pub chat: Arc<dyn Provider>,
}

impl Providers {
    pub fn uniform(p: Arc<dyn Provider>) -> Self {
        Providers {
            plan: p.clone(),
            text: p.clone(),
            widget: p.clone(),
            coherence: p.clone(),
            naive: p.clone(),
            chat: p,
        }
    }

    pub fn for_stage(&self, stage: Stage) -> &Arc<dyn Provider> {
        match stage {
            Stage::Plan => &self.plan,
            Stage::Text => &self.text,
            Stage::Widget => &self.widget,
            Stage::Coherence => &self.coherence,
            Stage::Naive => &self.naive,
            Stage::Chat => &self.chat,
        }
    }

    pub fn identities(&self) -> BTreeMap<String, String> {
        Stage::ALL
            .into_iter()
            .map(|s| (s.as_str().to_string(), self.for_stage(s).identity()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitStatus {
    Ok,
    Failed,
}

/// Generation result for one knowledge unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedUnit {
    pub unit_id: String,
    pub text_fragment: Option<String>,
    pub widget_fragment: Option<String>,
    pub attempts_text: usize,
    pub attempts_widget: usize,
    pub widget_fallback: bool,
    pub status: UnitStatus,
    #[serde(default)]
    pub failure_reasons: Vec<String>,
}

impl GeneratedUnit {
    /// Sets `status` from the fragments and recorded failures.
    pub fn settle(mut self) -> Self {
        if self.text_fragment.is_none() && self.failure_reasons.is_empty() {
            self.failure_reasons.push("text fragment missing".into());
        }
        if self.widget_fragment.is_none() && self.failure_reasons.is_empty() {
            self.failure_reasons.push("widget fragment missing".into());
        }
        self.status = if self.text_fragment.is_some() && self.widget_fragment.is_some() && self.failure_reasons.is_empty()
        {
            UnitStatus::Ok
        } else {
            UnitStatus::Failed
        };
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("planning failed after {attempts} attempts")]
    PlanFailed {
        attempts: usize,
        reports: Vec<ValidationReport>,
    },
    #[error("{stage} stage for unit {unit_id} failed after {attempts} attempts")]
    StageFailed {
        unit_id: String,
        stage: Stage,
        attempts: usize,
        reports: Vec<ValidationReport>,
    },
    #[error("execution failed at unit {unit_id}: {cause}")]
    ExecutionFailed {
        unit_id: String,
        unit_index: usize,
        cause: Box<PipelineError>,
        completed: Vec<GeneratedUnit>,
    },
    #[error("naive generation failed after {attempts} attempts")]
    NaiveFailed {
        attempts: usize,
        reports: Vec<ValidationReport>,
    },
    #[error("chat edit failed after {attempts} attempts")]
    ChatFailed {
        attempts: usize,
        reports: Vec<ValidationReport>,
    },
    #[error("provider error in {stage}/{key}: {source}")]
    Provider {
        stage: Stage,
        key: String,
        source: ProviderError,
    },
    #[error("widget compilation failed for unit {unit_id}: {source}")]
    Compile { unit_id: String, source: CompileError },
    #[error("invalid docspec:\n{0}")]
    InvalidSpec(ValidationReport),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl PipelineError {
    /// Structured form for reports and API payloads.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        let reports = |rs: &[ValidationReport]| serde_json::to_value(rs).expect("reports serialize");
        match self {
            PipelineError::PlanFailed { attempts, reports: rs } => {
                json!({"error": "plan_failed", "attempts": attempts, "reports": reports(rs)})
            }
            PipelineError::StageFailed {
                unit_id,
                stage,
                attempts,
                reports: rs,
            } => json!({
                "error": "stage_failed", "unit_id": unit_id, "stage": stage,
                "attempts": attempts, "reports": reports(rs)
            }),
            PipelineError::ExecutionFailed {
                unit_id,
                unit_index,
                cause,
                completed,
            } => json!({
                "error": "execution_failed", "unit_id": unit_id, "unit_index": unit_index,
                "cause": cause.to_json(), "completed": completed
            }),
            PipelineError::NaiveFailed { attempts, reports: rs } => {
                json!({"error": "naive_failed", "attempts": attempts, "reports": reports(rs)})
            }
            PipelineError::ChatFailed { attempts, reports: rs } => {
                json!({"error": "chat_failed", "attempts": attempts, "reports": reports(rs)})
            }
            PipelineError::Provider { stage, key, source } => {
                json!({"error": "provider", "stage": stage, "key": key, "message": source.to_string()})
            }
            PipelineError::Compile { unit_id, source } => {
                json!({"error": "compile", "unit_id": unit_id, "message": source.to_string()})
            }
            PipelineError::InvalidSpec(r) => json!({"error": "invalid_spec", "report": r}),
            PipelineError::Config(m) => json!({"error": "config", "message": m}),
        }
    }
}

/// Outcome of a bounded retry loop.
pub(crate) struct Attempted<T> {
    pub value: Option<T>,
    pub attempts: usize,
    pub reports: Vec<ValidationReport>,
}

/// Calls `provider` up to `k` times. `prompt` receives the previous
/// attempt's report as feedback; `accept` validates the fence-stripped reply.
pub(crate) fn with_retries<T>(
    provider: &dyn Provider,
    stage: Stage,
    key: &str,
    k: usize,
    mut prompt: impl FnMut(&str) -> String,
    mut accept: impl FnMut(&str) -> Result<T, ValidationReport>,
) -> Result<Attempted<T>, PipelineError> {
    let mut reports: Vec<ValidationReport> = Vec::new();
    for attempt in 1..=k {
        let fb = prompts::feedback(reports.last().map(|r| r.to_string()).as_deref());
        let req = CompletionRequest {
            stage,
            key: key.to_string(),
            prompt: prompt(&fb),
            schema: prompts::schema_name(stage),
        };
        let reply = provider.complete(&req).map_err(|source| PipelineError::Provider {
            stage,
            key: key.to_string(),
            source,
        })?;
        match accept(strip_code_fence(&reply)) {
            Ok(v) => {
                return Ok(Attempted {
                    value: Some(v),
                    attempts: attempt,
                    reports,
                })
            }
            Err(r) => {
                log::info!("{stage}/{key}: attempt {attempt} rejected ({} violations)", r.len());
                reports.push(r);
            }
        }
    }
    Ok(Attempted {
        value: None,
        attempts: k,
        reports,
    })
}

/// Parses structured output, reporting malformed JSON as a syntax violation.
pub(crate) fn parse_json_reply(text: &str) -> Result<serde_json::Value, ValidationReport> {
    serde_json::from_str(text).map_err(|e| {
        let mut r = ValidationReport::new();
        r.add(
            crate::report::ViolationKind::Syntax,
            "",
            format!("malformed JSON at line {} column {}: {e}", e.line(), e.column()),
        );
        r
    })
}
