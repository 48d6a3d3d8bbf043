use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, Weak};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use super::model::*;
use super::store::{Store, StoreError, DOCUMENT_FILE, EVALUATION_FILE, TRANSCRIPT_FILE, UNITS_FILE};
use crate::docspec::{
    apply_diff, diff_docspec, docspec_from_json, interaction_from_json, validate_docspec, ApplyError, DocSpec,
    DocSpecDiff,
};
use crate::pipeline::{
    self, directives_for_changed_units, evaluate, execute_with, plan, Directive, Document, EvaluationReport,
    GeneratedUnit, PipelineConfig, PipelineError, Progress, Provider, ProviderSource, Providers, Stage,
    TranscriptProvider, WidgetMode,
};
use crate::report::{ValidationReport, ViolationKind};
use crate::verify::static_check;
use crate::widget::{compile_widget, WidgetFragment};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("not ready: {0}")]
    NotReady(String),
    #[error("job in progress")]
    JobInProgress,
    #[error("revision precondition failed: expected {expected}, current is {current}")]
    Conflict { expected: u64, current: u64 },
    #[error("validation failed")]
    Invalid(ValidationReport),
    #[error("chat turn rejected")]
    Rejected(Box<ChatTurn>),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("{0}")]
    Pipeline(PipelineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("service is shutting down")]
    ShuttingDown,
}

impl ServiceError {
    fn from_store(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => ServiceError::NotFound(format!("session {id}")),
            other => ServiceError::Store(other),
        }
    }
}

type Result<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecuteRequest {
    #[serde(default)]
    pub mode: Option<WidgetMode>,
    /// Reuse the previous document's units where possible.
    #[serde(default)]
    pub partial: bool,
    /// Stages to re-run in a partial execution. When empty, units that
    /// changed since the previous document are re-run.
    #[serde(default)]
    pub directives: Vec<Directive>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionOutcome {
    pub revision: RevisionMeta,
    /// Changes relative to the previous revision.
    pub diff: DocSpecDiff,
}

struct Ticket {
    session: String,
    job: u64,
}

pub struct SessionService {
    store: Store,
    source: ProviderSource,
    config: PipelineConfig,
    queue: Mutex<Option<Sender<Ticket>>>,
    workers: Mutex<Vec<JoinHandle<()>>>,
    shutting_down: AtomicBool,
}

fn interrupted(job: &mut Job) {
    job.status = JobStatus::Failed;
    job.restartable = true;
    job.error = Some(serde_json::json!({"error": "interrupted", "message": "the service stopped before the job finished"}));
    job.finished_at = Some(now());
}

impl SessionService {
    /// Opens the store, marks jobs left active by a previous process as
    /// restartable failures and starts `workers` job threads.
    pub fn open(
        data_dir: &std::path::Path,
        source: ProviderSource,
        config: PipelineConfig,
        workers: usize,
    ) -> Result<Arc<SessionService>> {
        config.check().map_err(ServiceError::Pipeline)?;
        let store = Store::open(data_dir)?;
        for mut s in store.list()? {
            if let Some(job) = s.job.as_mut().filter(|j| j.status.is_active()) {
                log::warn!("session {}: job {} was interrupted", s.id, job.id);
                interrupted(job);
                s.updated_at = now();
                store.save(&s)?;
            }
        }
        let (tx, rx) = mpsc::channel::<Ticket>();
        let svc = Arc::new(SessionService {
            store,
            source,
            config,
            queue: Mutex::new(Some(tx)),
            workers: Mutex::new(Vec::new()),
            shutting_down: AtomicBool::new(false),
        });
        let rx = Arc::new(Mutex::new(rx));
        let mut handles = Vec::new();
        for i in 0..workers.max(1) {
            let weak = Arc::downgrade(&svc);
            let rx = rx.clone();
            let h = std::thread::Builder::new()
                .name(format!("docspec-job-{i}"))
                .spawn(move || worker_loop(weak, rx))
                .map_err(|e| ServiceError::BadRequest(format!("cannot start worker: {e}")))?;
            handles.push(h);
        }
        *svc.workers.lock().expect("workers lock") = handles;
        Ok(svc)
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn guard(&self) -> Result<()> {
        if self.shutting_down.load(Ordering::SeqCst) {
            Err(ServiceError::ShuttingDown)
        } else {
            Ok(())
        }
    }

    fn load(&self, id: &str) -> Result<Session> {
        self.store.load(id).map_err(ServiceError::from_store)
    }

    /// Runs `f` on the session under its writer lock and saves the result.
    fn update<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T>) -> Result<T> {
        let lock = self.store.lock(id);
        let _held = lock.lock().expect("session lock");
        let mut s = self.load(id)?;
        let out = f(&mut s)?;
        s.updated_at = now();
        self.store.save(&s)?;
        Ok(out)
    }

    fn providers(&self, session: &str) -> Result<Providers> {
        let base = self.source.make().map_err(|source| {
            ServiceError::Pipeline(PipelineError::Provider {
                stage: Stage::Plan,
                key: session.to_string(),
                source,
            })
        })?;
        let path = self.store.session_dir(session).join(TRANSCRIPT_FILE);
        let p: Arc<dyn Provider> = match TranscriptProvider::new(base.clone(), &path) {
            Ok(t) => Arc::new(t),
            Err(e) => {
                log::warn!("transcript disabled for {session}: {e}");
                base
            }
        };
        Ok(Providers::uniform(p))
    }

    fn enqueue(&self, session: &str, job: u64) -> Result<()> {
        let queue = self.queue.lock().expect("queue lock");
        match queue.as_ref() {
            Some(tx) => tx
                .send(Ticket {
                    session: session.to_string(),
                    job,
                })
                .map_err(|_| ServiceError::ShuttingDown),
            None => Err(ServiceError::ShuttingDown),
        }
    }

    fn new_job(s: &mut Session, kind: JobKind) -> Job {
        s.jobs_started += 1;
        Job {
            id: s.jobs_started,
            kind,
            status: JobStatus::Queued,
            revision: None,
            mode: None,
            partial: false,
            directives: Vec::new(),
            progress: Vec::new(),
            error: None,
            restartable: false,
            created_at: now(),
            finished_at: None,
        }
    }

    pub fn create_session(&self, topic: &str) -> Result<Session> {
        self.guard()?;
        let topic = topic.trim();
        if topic.is_empty() {
            let mut r = ValidationReport::new();
            r.add(ViolationKind::Schema, "/topic", "topic must not be empty");
            return Err(ServiceError::Invalid(r));
        }
        let id = self.store.allocate_id();
        let lock = self.store.lock(&id);
        let _held = lock.lock().expect("session lock");
        let t = now();
        let mut s = Session {
            id: id.clone(),
            topic: topic.to_string(),
            created_at: t.clone(),
            updated_at: t,
            revisions: Vec::new(),
            job: None,
            jobs_started: 0,
            document: None,
            evaluation: None,
            chat: Vec::new(),
        };
        let job = Self::new_job(&mut s, JobKind::Plan);
        let job_id = job.id;
        s.job = Some(job);
        self.store.save(&s)?;
        self.enqueue(&id, job_id)?;
        Ok(s)
    }

    pub fn list_sessions(&self) -> Result<Vec<SessionSummary>> {
        Ok(self.store.list()?.iter().map(SessionSummary::from).collect())
    }

    pub fn get_session(&self, id: &str) -> Result<Session> {
        self.load(id)
    }

    pub fn get_docspec(&self, id: &str) -> Result<(RevisionMeta, DocSpec)> {
        let s = self.load(id)?;
        let rev = s
            .latest_revision()
            .cloned()
            .ok_or_else(|| ServiceError::NotReady("session has no docspec revision yet".into()))?;
        let spec = self.store.read_revision(id, rev.id)?;
        Ok((rev, spec))
    }

    pub fn get_revision(&self, id: &str, revision: u64) -> Result<(RevisionMeta, DocSpec)> {
        let s = self.load(id)?;
        let rev = s
            .revisions
            .iter()
            .find(|r| r.id == revision)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("revision {revision}")))?;
        let spec = self.store.read_revision(id, revision)?;
        Ok((rev, spec))
    }

    fn append_revision(&self, s: &mut Session, spec: &DocSpec, origin: Origin) -> Result<RevisionOutcome> {
        let prior = match s.latest_revision() {
            Some(r) => Some(self.store.read_revision(&s.id, r.id)?),
            None => None,
        };
        let meta = RevisionMeta {
            id: s.revisions.len() as u64 + 1,
            created_at: now(),
            origin,
        };
        self.store.write_revision(&s.id, meta.id, spec)?;
        s.revisions.push(meta.clone());
        let diff = match prior {
            Some(p) => diff_docspec(&p, spec),
            None => DocSpecDiff::default(),
        };
        Ok(RevisionOutcome { revision: meta, diff })
    }

    /// Appends a human revision. `if_match` is the revision id the client
    /// edited; a mismatch means someone else saved first.
    pub fn put_docspec(&self, id: &str, body: &serde_json::Value, if_match: Option<u64>) -> Result<RevisionOutcome> {
        self.guard()?;
        let spec = docspec_from_json(body).map_err(ServiceError::Invalid)?;
        let report = validate_docspec(&spec);
        if !report.is_empty() {
            return Err(ServiceError::Invalid(report));
        }
        self.update(id, |s| {
            let current = s.latest_revision().map_or(0, |r| r.id);
            if let Some(expected) = if_match {
                if expected != current {
                    return Err(ServiceError::Conflict { expected, current });
                }
            }
            self.append_revision(s, &spec, Origin::Human)
        })
    }

    pub fn execute_session(&self, id: &str, req: ExecuteRequest) -> Result<Job> {
        self.guard()?;
        let job = self.update(id, |s| {
            if s.active_job().is_some() {
                return Err(ServiceError::JobInProgress);
            }
            let rev = s
                .latest_revision()
                .map(|r| r.id)
                .ok_or_else(|| ServiceError::NotReady("session has no docspec revision yet".into()))?;
            let spec = self.store.read_revision(&s.id, rev)?;
            let mut job = Self::new_job(s, JobKind::Execute);
            job.revision = Some(rev);
            job.mode = Some(req.mode.unwrap_or(self.config.widget_mode));
            job.partial = req.partial;
            job.directives = req.directives.clone();
            job.progress = spec
                .units
                .iter()
                .map(|u| UnitProgress {
                    unit: u.id.clone(),
                    text: StepState::Pending,
                    widget: StepState::Pending,
                })
                .collect();
            s.job = Some(job.clone());
            Ok(job)
        })?;
        self.enqueue(id, job.id)?;
        Ok(job)
    }

    /// Queues a copy of a job that an interruption stopped.
    pub fn restart_job(&self, id: &str) -> Result<Job> {
        self.guard()?;
        let job = self.update(id, |s| {
            let old = match &s.job {
                Some(j) if j.status == JobStatus::Failed && j.restartable => j.clone(),
                Some(j) if j.status.is_active() => return Err(ServiceError::JobInProgress),
                _ => return Err(ServiceError::BadRequest("no restartable job".into())),
            };
            let mut job = Self::new_job(s, old.kind);
            if old.kind == JobKind::Execute {
                job.revision = s.latest_revision().map(|r| r.id);
                job.mode = old.mode;
                job.partial = old.partial;
                job.directives = old.directives;
                job.progress = old
                    .progress
                    .into_iter()
                    .map(|p| UnitProgress {
                        text: StepState::Pending,
                        widget: StepState::Pending,
                        ..p
                    })
                    .collect();
            }
            s.job = Some(job.clone());
            Ok(job)
        })?;
        self.enqueue(id, job.id)?;
        Ok(job)
    }

    pub fn job(&self, id: &str) -> Result<Option<Job>> {
        Ok(self.load(id)?.job)
    }

    pub fn get_document(&self, id: &str) -> Result<Vec<u8>> {
        let s = self.load(id)?;
        if s.document.is_none() {
            return Err(ServiceError::NotReady("no document has been generated".into()));
        }
        self.store
            .read_file(id, DOCUMENT_FILE)?
            .ok_or_else(|| ServiceError::NotReady("document file missing".into()))
    }

    fn load_units(&self, id: &str) -> Result<Vec<GeneratedUnit>> {
        let bytes = self
            .store
            .read_file(id, UNITS_FILE)?
            .ok_or_else(|| ServiceError::NotReady("generated units missing".into()))?;
        serde_json::from_slice(&bytes).map_err(|e| {
            ServiceError::Store(StoreError::Corrupt {
                path: self.store.session_dir(id).join(UNITS_FILE),
                message: e.to_string(),
            })
        })
    }

    pub fn evaluate_session(&self, id: &str) -> Result<EvaluationReport> {
        self.guard()?;
        let s = self.load(id)?;
        let doc_meta = s
            .document
            .clone()
            .ok_or_else(|| ServiceError::NotReady("no document to evaluate".into()))?;
        let spec = self.store.read_revision(id, doc_meta.revision)?;
        let units = self.load_units(id)?;
        let html = String::from_utf8_lossy(&self.get_document(id)?).into_owned();
        let doc = Document {
            title: spec.topic.clone(),
            html,
            unit_ids: spec.units.iter().map(|u| u.id.clone()).collect(),
        };
        let providers = self.providers(id)?;
        let report = evaluate(&doc, &units, &spec, providers.coherence.as_ref(), &self.config);
        self.update(id, |s| {
            self.store
                .write_file(id, EVALUATION_FILE, pipeline::pretty_json(&report).as_bytes())?;
            s.evaluation = Some(EvaluationMeta {
                revision: doc_meta.revision,
                verdict: report.verdict,
                created_at: now(),
            });
            Ok(())
        })?;
        Ok(report)
    }

    pub fn get_evaluation(&self, id: &str) -> Result<EvaluationReport> {
        let s = self.load(id)?;
        if s.evaluation.is_none() {
            return Err(ServiceError::NotReady("document has not been evaluated".into()));
        }
        let bytes = self
            .store
            .read_file(id, EVALUATION_FILE)?
            .ok_or_else(|| ServiceError::NotReady("evaluation file missing".into()))?;
        serde_json::from_slice(&bytes).map_err(|e| {
            ServiceError::Store(StoreError::Corrupt {
                path: self.store.session_dir(id).join(EVALUATION_FILE),
                message: e.to_string(),
            })
        })
    }

    pub fn chat_edit(&self, id: &str, message: &str) -> Result<ChatTurn> {
        self.guard()?;
        if message.trim().is_empty() {
            let mut r = ValidationReport::new();
            r.add(ViolationKind::Schema, "/message", "message must not be empty");
            return Err(ServiceError::Invalid(r));
        }
        let (rev, spec) = self.get_docspec(id)?;
        let providers = self.providers(id)?;
        let proposal = pipeline::chat_edit(&spec, message, providers.chat.as_ref(), &self.config)
            .map_err(ServiceError::Pipeline)?;
        self.update(id, |s| {
            let turn = ChatTurn {
                id: s.chat.len() as u64 + 1,
                message: message.trim().to_string(),
                explanation: proposal.explanation,
                diff: proposal.diff,
                base_revision: rev.id,
                status: TurnStatus::Proposed,
                accepted: false,
                report: None,
                revision: None,
                created_at: now(),
            };
            s.chat.push(turn.clone());
            Ok(turn)
        })
    }

    /// Applies a proposed diff to the latest revision. A diff that does not
    /// apply or yields an invalid spec marks the turn rejected.
    pub fn accept_chat(&self, id: &str, turn_id: u64) -> Result<RevisionOutcome> {
        self.guard()?;
        let result = self.update(id, |s| {
            let idx = s
                .chat
                .iter()
                .position(|t| t.id == turn_id)
                .ok_or_else(|| ServiceError::NotFound(format!("chat turn {turn_id}")))?;
            if s.chat[idx].status != TurnStatus::Proposed {
                return Err(ServiceError::BadRequest(format!("chat turn {turn_id} was already decided")));
            }
            let rev = s
                .latest_revision()
                .map(|r| r.id)
                .ok_or_else(|| ServiceError::NotReady("session has no docspec revision yet".into()))?;
            let latest = self.store.read_revision(&s.id, rev)?;
            let applied = apply_diff(&latest, &s.chat[idx].diff).map_err(|e| match e {
                ApplyError::Schema(r) => r,
                other => {
                    let mut r = ValidationReport::new();
                    r.add(ViolationKind::Semantic, "", other.to_string());
                    r
                }
            });
            let applied = applied.and_then(|spec| {
                let r = validate_docspec(&spec);
                if r.is_empty() {
                    Ok(spec)
                } else {
                    Err(r)
                }
            });
            match applied {
                Ok(spec) => {
                    let out = self.append_revision(s, &spec, Origin::Chat)?;
                    let turn = &mut s.chat[idx];
                    turn.status = TurnStatus::Accepted;
                    turn.accepted = true;
                    turn.revision = Some(out.revision.id);
                    Ok(Ok(out))
                }
                Err(report) => {
                    let turn = &mut s.chat[idx];
                    turn.status = TurnStatus::Rejected;
                    turn.report = Some(report);
                    Ok(Err(turn.clone()))
                }
            }
        })?;
        result.map_err(|turn| ServiceError::Rejected(Box::new(turn)))
    }

    /// Discards a proposal without touching the spec.
    pub fn reject_chat(&self, id: &str, turn_id: u64) -> Result<ChatTurn> {
        self.guard()?;
        self.update(id, |s| {
            let turn = s
                .chat
                .iter_mut()
                .find(|t| t.id == turn_id)
                .ok_or_else(|| ServiceError::NotFound(format!("chat turn {turn_id}")))?;
            if turn.status != TurnStatus::Proposed {
                return Err(ServiceError::BadRequest(format!("chat turn {turn_id} was already decided")));
            }
            turn.status = TurnStatus::Rejected;
            Ok(turn.clone())
        })
    }

    /// Marks active jobs as restartable failures and stops taking work.
    /// Workers finishing afterwards find their job no longer running and
    /// discard the result.
    pub fn shutdown(&self) {
        if self.shutting_down.swap(true, Ordering::SeqCst) {
            return;
        }
        self.queue.lock().expect("queue lock").take();
        let sessions = match self.store.list() {
            Ok(s) => s,
            Err(e) => {
                log::error!("shutdown: cannot list sessions: {e}");
                return;
            }
        };
        for s in sessions {
            if s.active_job().is_none() {
                continue;
            }
            let r = self.update(&s.id, |s| {
                if let Some(job) = s.job.as_mut().filter(|j| j.status.is_active()) {
                    interrupted(job);
                }
                Ok(())
            });
            if let Err(e) = r {
                log::error!("shutdown: cannot flush session {}: {e}", s.id);
            }
        }
    }

    /// Waits for worker threads to exit. Call after [`shutdown`](Self::shutdown).
    pub fn join_workers(&self) {
        let handles = std::mem::take(&mut *self.workers.lock().expect("workers lock"));
        for h in handles {
            let _ = h.join();
        }
    }

    fn claim(&self, t: &Ticket) -> Result<Option<Job>> {
        self.update(&t.session, |s| match s.job.as_mut() {
            Some(job) if job.id == t.job && job.status == JobStatus::Queued => {
                job.status = JobStatus::Running;
                Ok(Some(job.clone()))
            }
            _ => Ok(None),
        })
    }

    /// Applies `f` to the job only while it is still the running job `job_id`.
    fn finish(&self, session: &str, job_id: u64, f: impl FnOnce(&mut Session) -> Result<()>) -> Result<()> {
        self.update(session, |s| match &s.job {
            Some(j) if j.id == job_id && j.status == JobStatus::Running => f(s),
            _ => {
                log::info!("session {session}: job {job_id} result discarded");
                Ok(())
            }
        })
    }

    fn fail(&self, session: &str, job_id: u64, error: serde_json::Value) -> Result<()> {
        self.finish(session, job_id, |s| {
            let job = s.job.as_mut().expect("finish checked the job");
            job.status = JobStatus::Failed;
            job.error = Some(error);
            job.finished_at = Some(now());
            Ok(())
        })
    }

    fn run_job(&self, t: &Ticket) -> Result<()> {
        let Some(job) = self.claim(t)? else {
            return Ok(());
        };
        let providers = match self.providers(&t.session) {
            Ok(p) => p,
            Err(ServiceError::Pipeline(e)) => return self.fail(&t.session, job.id, e.to_json()),
            Err(e) => return Err(e),
        };
        match job.kind {
            JobKind::Plan => {
                let topic = self.load(&t.session)?.topic;
                match plan(&topic, providers.plan.as_ref(), &self.config) {
                    Ok(out) => self.finish(&t.session, job.id, |s| {
                        self.append_revision(s, &out.spec, Origin::Planner)?;
                        let job = s.job.as_mut().expect("finish checked the job");
                        job.status = JobStatus::Done;
                        job.finished_at = Some(now());
                        Ok(())
                    }),
                    Err(e) => self.fail(&t.session, job.id, e.to_json()),
                }
            }
            JobKind::Execute => self.run_execute(t, &job, &providers),
        }
    }

    fn run_execute(&self, t: &Ticket, job: &Job, providers: &Providers) -> Result<()> {
        let rev = job.revision.expect("execute jobs name a revision");
        let spec = self.store.read_revision(&t.session, rev)?;
        let config = PipelineConfig {
            widget_mode: job.mode.unwrap_or(self.config.widget_mode),
            ..self.config.clone()
        };
        let session = self.load(&t.session)?;
        let mut previous: Option<(Vec<GeneratedUnit>, Vec<Directive>)> = None;
        if job.partial {
            if let Some(doc) = &session.document {
                let units = self.load_units(&t.session)?;
                let directives = if job.directives.is_empty() {
                    let old = self.store.read_revision(&t.session, doc.revision)?;
                    directives_for_changed_units(&old, &spec)
                } else {
                    job.directives.clone()
                };
                previous = Some((units, directives));
            }
        }
        let progress = |p: &Progress| {
            let r = self.finish(&t.session, job.id, |s| {
                let job = s.job.as_mut().expect("finish checked the job");
                if let Some(step) = job
                    .progress
                    .iter_mut()
                    .find(|u| u.unit == p.unit_id)
                    .and_then(|u| u.step_mut(p.stage))
                {
                    *step = match (p.ok, p.reused) {
                        (false, _) => StepState::Failed,
                        (true, true) => StepState::Reused,
                        (true, false) => StepState::Done,
                    };
                }
                Ok(())
            });
            if let Err(e) = r {
                log::error!("progress update failed: {e}");
            }
        };
        let result = execute_with(
            &spec,
            providers,
            &config,
            previous.as_ref().map(|(u, d)| (u.as_slice(), d.as_slice())),
            &progress,
        );
        match result {
            Ok(exec) => self.finish(&t.session, job.id, |s| {
                self.store.write_file(&s.id, UNITS_FILE, pipeline::pretty_json(&exec.units).as_bytes())?;
                self.store.write_file(&s.id, DOCUMENT_FILE, exec.document.html.as_bytes())?;
                s.document = Some(DocumentMeta {
                    revision: rev,
                    job: job.id,
                    created_at: now(),
                });
                s.evaluation = None;
                let job = s.job.as_mut().expect("finish checked the job");
                job.status = JobStatus::Done;
                job.finished_at = Some(now());
                Ok(())
            }),
            Err(e) => self.fail(&t.session, job.id, e.to_json()),
        }
    }

    /// Stateless widget preview for an interaction spec.
    pub fn compile_preview(&self, interaction: &serde_json::Value, container_id: &str) -> Result<WidgetFragment> {
        let spec = interaction_from_json(interaction).map_err(ServiceError::Invalid)?;
        let report = static_check(&spec);
        if !report.is_empty() {
            return Err(ServiceError::Invalid(report));
        }
        compile_widget(&spec, container_id).map_err(|e| {
            let mut r = ValidationReport::new();
            r.add(ViolationKind::Semantic, "/container_id", e.to_string());
            ServiceError::Invalid(r)
        })
    }
}

fn worker_loop(svc: Weak<SessionService>, rx: Arc<Mutex<Receiver<Ticket>>>) {
    loop {
        let ticket = {
            let guard = rx.lock().expect("queue receiver");
            guard.recv()
        };
        let Ok(ticket) = ticket else {
            return;
        };
        let Some(svc) = svc.upgrade() else {
            return;
        };
        if let Err(e) = svc.run_job(&ticket) {
            log::error!("session {} job {}: {e}", ticket.session, ticket.job);
            let _ = svc.fail(&ticket.session, ticket.job, serde_json::json!({"error": "internal", "message": e.to_string()}));
        }
    }
}

impl Drop for SessionService {
    fn drop(&mut self) {
        self.queue.get_mut().expect("queue lock").take();
    }
}
