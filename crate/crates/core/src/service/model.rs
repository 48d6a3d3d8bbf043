use serde::{Deserialize, Serialize};

use crate::docspec::DocSpecDiff;
use crate::pipeline::{Stage, Verdict, WidgetMode};
use crate::report::ValidationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Planner,
    Human,
    Chat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionMeta {
    pub id: u64,
    pub created_at: String,
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Plan,
    Execute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_active(self) -> bool {
        matches!(self, JobStatus::Queued | JobStatus::Running)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepState {
    Pending,
    Done,
    Reused,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitProgress {
    pub unit: String,
    pub text: StepState,
    pub widget: StepState,
}

impl UnitProgress {
    pub fn step_mut(&mut self, stage: Stage) -> Option<&mut StepState> {
        match stage {
            Stage::Text => Some(&mut self.text),
            Stage::Widget => Some(&mut self.widget),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: u64,
    pub kind: JobKind,
    pub status: JobStatus,
    /// Revision an execute job runs against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<WidgetMode>,
    #[serde(default)]
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub directives: Vec<crate::pipeline::Directive>,
    #[serde(default)]
    pub progress: Vec<UnitProgress>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<serde_json::Value>,
    /// Interrupted by a shutdown or crash rather than failing on its own.
    #[serde(default)]
    pub restartable: bool,
    pub created_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentMeta {
    pub revision: u64,
    pub job: u64,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationMeta {
    pub revision: u64,
    pub verdict: Verdict,
    pub created_at: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnStatus {
    Proposed,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub id: u64,
    pub message: String,
    pub explanation: String,
    pub diff: DocSpecDiff,
    /// Revision the proposal was made against.
    pub base_revision: u64,
    pub status: TurnStatus,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
    /// Revision created by accepting the turn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<u64>,
    pub created_at: String,
}

/// Persistent state of one topic's workflow. Revision bodies live in their
/// own files; this record holds only their metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub topic: String,
    pub created_at: String,
    pub updated_at: String,
    pub revisions: Vec<RevisionMeta>,
    #[serde(default)]
    pub job: Option<Job>,
    #[serde(default)]
    pub jobs_started: u64,
    #[serde(default)]
    pub document: Option<DocumentMeta>,
    #[serde(default)]
    pub evaluation: Option<EvaluationMeta>,
    #[serde(default)]
    pub chat: Vec<ChatTurn>,
}

impl Session {
    pub fn latest_revision(&self) -> Option<&RevisionMeta> {
        self.revisions.last()
    }

    pub fn active_job(&self) -> Option<&Job> {
        self.job.as_ref().filter(|j| j.status.is_active())
    }
}

/// Condensed listing entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub topic: String,
    pub revisions: usize,
    pub job: Option<JobStatus>,
    pub has_document: bool,
    pub updated_at: String,
}

impl From<&Session> for SessionSummary {
    fn from(s: &Session) -> Self {
        SessionSummary {
            id: s.id.clone(),
            topic: s.topic.clone(),
            revisions: s.revisions.len(),
            job: s.job.as_ref().map(|j| j.status),
            has_document: s.document.is_some(),
            updated_at: s.updated_at.clone(),
        }
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
