use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::evaluator::{evaluate, EvaluationReport, Verdict};
use super::executor::{execute, Execution};
use super::naive::run_naive;
use super::planner::plan;
use super::{PipelineConfig, PipelineError, Providers};
use crate::docspec::{serialize_docspec, DocSpec};

pub const DOCUMENT_FILE: &str = "document.html";
pub const DOCSPEC_FILE: &str = "spec.docspec.json";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const VERIFICATION_FILE: &str = "verification.json";
pub const SUMMARY_FILE: &str = "summary.json";

/// Everything a full planner/executor/evaluator run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub spec: DocSpec,
    /// Planner calls; `None` when the spec was supplied.
    pub plan_attempts: Option<usize>,
    pub execution: Execution,
    pub evaluation: EvaluationReport,
}

/// Plans `topic` unless `spec` is given, then executes and evaluates.
pub fn run_pipeline(
    topic: Option<&str>,
    spec: Option<DocSpec>,
    providers: &Providers,
    config: &PipelineConfig,
) -> Result<RunOutcome, PipelineError> {
    let (spec, plan_attempts) = match (spec, topic) {
        (Some(s), _) => (s, None),
        (None, Some(t)) => {
            let p = plan(t, providers.plan.as_ref(), config)?;
            (p.spec, Some(p.attempts))
        }
        (None, None) => return Err(PipelineError::Config("a topic or a spec is required".into())),
    };
    let execution = execute(&spec, providers, config)?;
    let evaluation = evaluate(
        &execution.document,
        &execution.units,
        &spec,
        providers.coherence.as_ref(),
        config,
    );
    Ok(RunOutcome {
        spec,
        plan_attempts,
        execution,
        evaluation,
    })
}

pub(crate) fn pretty_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Writes the document, final spec and evaluation into `dir`.
pub fn write_run_artifacts(dir: &Path, run: &RunOutcome) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files = [
        (DOCUMENT_FILE, run.execution.document.html.clone()),
        (DOCSPEC_FILE, serialize_docspec(&run.spec)),
        (EVALUATION_FILE, pretty_json(&run.evaluation)),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        out.push(path);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: String,
    pub status: String,
    pub provider_calls: usize,
    pub has_docspec: bool,
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub topic: String,
    pub naive: ArmSummary,
    pub pipeline: ArmSummary,
}

fn rel(root: &Path, p: &Path) -> String {
    p.strip_prefix(root).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

/// Runs the single-call baseline and the full pipeline on one topic and
/// writes both arms side by side under `out_dir/naive` and `out_dir/pipeline`.
pub fn compare(
    topic: &str,
    providers: &Providers,
    config: &PipelineConfig,
    out_dir: &Path,
) -> io::Result<ComparisonSummary> {
    let naive_dir = out_dir.join("naive");
    let pipe_dir = out_dir.join("pipeline");
    fs::create_dir_all(&naive_dir)?;
    fs::create_dir_all(&pipe_dir)?;

    let naive = match run_naive(topic, providers.naive.as_ref(), config) {
        Ok(n) => {
            let path = naive_dir.join(DOCUMENT_FILE);
            fs::write(&path, &n.document.html)?;
            ArmSummary {
                arm: "naive".into(),
                status: "ok".into(),
                provider_calls: n.attempts,
                has_docspec: false,
                artifacts: vec![rel(out_dir, &path)],
                verdict: None,
                error: None,
            }
        }
        Err(e) => ArmSummary {
            arm: "naive".into(),
            status: "failed".into(),
            provider_calls: match &e {
                PipelineError::NaiveFailed { attempts, .. } => *attempts,
                _ => 0,
            },
            has_docspec: false,
            artifacts: Vec::new(),
            verdict: None,
            error: Some(e.to_json()),
        },
    };

    let pipeline = match run_pipeline(Some(topic), None, providers, config) {
        Ok(run) => {
            let mut paths = write_run_artifacts(&pipe_dir, &run)?;
            let reports: Vec<_> = run
                .evaluation
                .constraints
                .iter()
                .map(|c| serde_json::json!({"unit": c.unit, "report": c.report}))
                .collect();
            let vpath = pipe_dir.join(VERIFICATION_FILE);
            fs::write(&vpath, pretty_json(&reports))?;
            paths.push(vpath);
            let calls = run.plan_attempts.unwrap_or(0)
                + run
                    .execution
                    .units
                    .iter()
                    .map(|u| u.attempts_text + u.attempts_widget)
                    .sum::<usize>()
                + run.evaluation.coherence_attempts;
            ArmSummary {
                arm: "pipeline".into(),
                status: "ok".into(),
                provider_calls: calls,
                has_docspec: true,
                artifacts: paths.iter().map(|p| rel(out_dir, p)).collect(),
                verdict: Some(run.evaluation.verdict),
                error: None,
            }
        }
        Err(e) => ArmSummary {
            arm: "pipeline".into(),
            status: "failed".into(),
            provider_calls: 0,
            has_docspec: false,
            artifacts: Vec::new(),
            verdict: None,
            error: Some(e.to_json()),
        },
    };

    let summary = ComparisonSummary {
        topic: topic.to_string(),
        naive,
        pipeline,
    };
    fs::write(out_dir.join(SUMMARY_FILE), pretty_json(&summary))?;
    Ok(summary)
}
