mod common;

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use docspec::docspec::{docspec_to_json, DiffEntry, DocSpec};
use docspec::pipeline::{Directive, PipelineConfig, Provider, ProviderSource, ScriptedProvider, Stage, Verdict};
use docspec::service::*;
use docspec::widget::validate_widget_contract;
use serde_json::{json, Value};

fn open(dir: &Path, source: ProviderSource) -> Arc<SessionService> {
    SessionService::open(dir, source, PipelineConfig::default(), 2).unwrap()
}

fn wait_idle(svc: &SessionService, id: &str) -> Job {
    let deadline = Instant::now() + Duration::from_secs(20);
    loop {
        let job = svc.job(id).unwrap().expect("session has a job");
        if !job.status.is_active() {
            return job;
        }
        assert!(Instant::now() < deadline, "job did not finish: {job:?}");
        std::thread::sleep(Duration::from_millis(5));
    }
}

fn planned(svc: &SessionService, topic: &str) -> String {
    let s = svc.create_session(topic).unwrap();
    let job = wait_idle(svc, &s.id);
    assert_eq!(job.status, JobStatus::Done, "{job:?}");
    s.id
}

fn executed(svc: &SessionService, id: &str, req: ExecuteRequest) -> Job {
    svc.execute_session(id, req).unwrap();
    let job = wait_idle(svc, id);
    assert_eq!(job.status, JobStatus::Done, "{job:?}");
    job
}

fn with_slider_max(spec: &DocSpec, unit: usize, max: f64) -> Value {
    let mut v = docspec_to_json(spec);
    v["units"][unit]["interaction"]["state"][0]["max"] = json!(max);
    v
}

fn shutdown(svc: Arc<SessionService>) {
    svc.shutdown();
    svc.join_workers();
    drop(svc);
}

#[test]
fn plan_job_records_fixture_as_revision_one() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), ProviderSource::Scripted(scripted("matrix-rank")));
    let id = planned(&svc, RANK_TOPIC);
    let (rev, spec) = svc.get_docspec(&id).unwrap();
    assert_eq!(rev.id, 1);
    assert_eq!(rev.origin, Origin::Planner);
    assert_eq!(spec, load_spec(&spec_path("matrix_rank")));
    let other = svc.create_session(RANK_TOPIC).unwrap();
    assert_ne!(other.id, id);
    wait_idle(&svc, &other.id);
}

#[test]
fn empty_topic_is_rejected_with_field_error() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), ProviderSource::Scripted(scripted("matrix-rank")));
    match svc.create_session("  ") {
        Err(ServiceError::Invalid(r)) => assert!(r.iter().any(|v| v.path == "/topic")),
        other => panic!("expected invalid, got {other:?}"),
    }
    assert!(svc.list_sessions().unwrap().is_empty());
}

#[test]
fn failed_plan_surfaces_payload() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), ProviderSource::Scripted(scripted("matrix-rank")));
    let s = svc.create_session("A topic with no fixture").unwrap();
    let job = wait_idle(&svc, &s.id);
    assert_eq!(job.status, JobStatus::Failed);
    assert!(!job.restartable);
    assert_eq!(job.error.as_ref().unwrap()["error"], "provider");
    assert!(matches!(svc.get_docspec(&s.id), Err(ServiceError::NotReady(_))));
    assert!(matches!(svc.chat_edit(&s.id, "anything"), Err(ServiceError::NotReady(_))));
}

#[test]
fn put_docspec_appends_revisions_and_checks_preconditions() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), ProviderSource::Scripted(scripted("pi")));
    let id = planned(&svc, PI_TOPIC);
    let (_, spec) = svc.get_docspec(&id).unwrap();

    let out = svc.put_docspec(&id, &with_slider_max(&spec, 0, 10.0), Some(1)).unwrap();
    assert_eq!(out.revision.id, 2);
    assert_eq!(out.revision.origin, Origin::Human);
    assert_eq!(out.diff.len(), 1);
    match &out.diff.entries[0] {
        DiffEntry::FieldChanged { unit, path, old, new } => {
            assert_eq!(unit.as_deref(), Some("pi-ratio"));
            assert_eq!(path, "/interaction/state/0/max");
            assert_eq!(old.as_ref(), Some(&json!(5)));
            assert_eq!(new.as_ref(), Some(&json!(10)));
        }
        other => panic!("unexpected entry {other:?}"),
    }

    let mut cyclic = docspec_to_json(&spec);
    cyclic["units"][0]["interaction"]["state"][1]["formula"] = json!("ratio*D");
    match svc.put_docspec(&id, &cyclic, Some(2)) {
        Err(ServiceError::Invalid(r)) => assert!(r.mentions("cycle"), "{r}"),
        other => panic!("expected invalid, got {other:?}"),
    }
    assert_eq!(svc.get_session(&id).unwrap().revisions.len(), 2);

    match svc.put_docspec(&id, &with_slider_max(&spec, 0, 7.0), Some(1)) {
        Err(ServiceError::Conflict { expected: 1, current: 2 }) => {}
        other => panic!("expected conflict, got {other:?}"),
    }
    assert_eq!(svc.get_revision(&id, 1).unwrap().1, spec);
}

#[test]
fn concurrent_puts_with_same_precondition_serialize() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), ProviderSource::Scripted(scripted("pi")));
    let id = planned(&svc, PI_TOPIC);
    let (_, spec) = svc.get_docspec(&id).unwrap();
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = [6.0, 7.0, 8.0, 9.0]
            .into_iter()
            .map(|max| {
                let body = with_slider_max(&spec, 0, max);
                let svc = &svc;
                let id = &id;
                s.spawn(move || svc.put_docspec(id, &body, Some(1)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let ok = results.iter().filter(|r| r.is_ok()).count();
    let conflicts = results
        .iter()
        .filter(|r| matches!(r, Err(ServiceError::Conflict { .. })))
        .count();
    assert_eq!((ok, conflicts), (1, 3));
    assert_eq!(svc.get_session(&id).unwrap().revisions.len(), 2);
}

#[test]
fn execute_stores_document_and_rejects_overlap() {
    let dir = tempfile::tempdir().unwrap();
    let base: Arc<dyn Provider> = Arc::new(ScriptedProvider::from_dir(&scripted("matrix-rank")).unwrap());
    let gate = common::Gate::new(base, Stage::Text);
    let svc = open(dir.path(), ProviderSource::Fixed(gate.clone()));
    let id = planned(&svc, RANK_TOPIC);
    assert!(matches!(svc.get_document(&id), Err(ServiceError::NotReady(_))));

    let job = svc.execute_session(&id, ExecuteRequest::default()).unwrap();
    assert_eq!(job.revision, Some(1));
    gate.wait_for_caller();
    assert!(matches!(
        svc.execute_session(&id, ExecuteRequest::default()),
        Err(ServiceError::JobInProgress)
    ));
    assert!(matches!(svc.get_document(&id), Err(ServiceError::NotReady(_))));
    let running = svc.job(&id).unwrap().unwrap();
    assert_eq!(running.status, JobStatus::Running);
    assert_eq!(running.progress.len(), 3);
    gate.open();

    let job = wait_idle(&svc, &id);
    assert_eq!(job.status, JobStatus::Done);
    assert!(job
        .progress
        .iter()
        .all(|p| p.text == StepState::Done && p.widget == StepState::Done));
    let html = String::from_utf8(svc.get_document(&id).unwrap()).unwrap();
    assert_eq!(html.matches("class=\"docspec-unit\"").count(), 3);
    let session = svc.get_session(&id).unwrap();
    assert_eq!(session.document.unwrap().revision, 1);
}

#[test]
fn partial_reexecution_reruns_only_edited_unit() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), ProviderSource::Scripted(scripted("matrix-rank")));
    let id = planned(&svc, RANK_TOPIC);
    executed(&svc, &id, ExecuteRequest::default());
    let first = svc.get_document(&id).unwrap();

    let (_, spec) = svc.get_docspec(&id).unwrap();
    svc.put_docspec(&id, &with_slider_max(&spec, 1, 4.0), Some(1)).unwrap();
    let job = executed(
        &svc,
        &id,
        ExecuteRequest {
            partial: true,
            ..Default::default()
        },
    );
    for p in &job.progress {
        let expected = if p.unit == "rank-drop" { StepState::Done } else { StepState::Reused };
        assert_eq!((p.unit.as_str(), p.text, p.widget), (p.unit.as_str(), expected, expected));
    }
    let second = svc.get_document(&id).unwrap();
    assert_ne!(first, second);
    assert_eq!(svc.get_session(&id).unwrap().document.unwrap().revision, 2);

    let job = executed(
        &svc,
        &id,
        ExecuteRequest {
            partial: true,
            directives: vec![Directive {
                unit: "row-space".into(),
                stage: Stage::Widget,
            }],
            ..Default::default()
        },
    );
    let row = job.progress.iter().find(|p| p.unit == "row-space").unwrap();
    assert_eq!((row.text, row.widget), (StepState::Reused, StepState::Done));
    assert_eq!(svc.get_document(&id).unwrap(), second);
}

#[test]
fn evaluation_is_deterministic_and_flags_violations() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), ProviderSource::Scripted(scripted("pi")));
    let id = planned(&svc, PI_TOPIC);
    assert!(matches!(svc.evaluate_session(&id), Err(ServiceError::NotReady(_))));
    executed(&svc, &id, ExecuteRequest::default());
    let a = svc.evaluate_session(&id).unwrap();
    let b = svc.evaluate_session(&id).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.verdict, Verdict::Pass);
    assert_eq!(svc.get_evaluation(&id).unwrap(), a);

    let violated: Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("violated/pi_ratio_3.docspec.json")).unwrap())
            .unwrap();
    svc.put_docspec(&id, &violated, None).unwrap();
    executed(&svc, &id, ExecuteRequest::default());
    assert!(matches!(svc.get_evaluation(&id), Err(ServiceError::NotReady(_))));
    let report = svc.evaluate_session(&id).unwrap();
    assert_eq!(report.verdict, Verdict::Fail);
    assert_eq!(
        report.directives,
        vec![Directive {
            unit: "pi-ratio".into(),
            stage: Stage::Widget
        }]
    );
}

#[test]
fn chat_turns_are_applied_only_when_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), ProviderSource::Scripted(scripted("pi")));
    let id = planned(&svc, PI_TOPIC);

    let turn = svc.chat_edit(&id, "Widen the radius slider to 10").unwrap();
    assert_eq!(turn.status, TurnStatus::Proposed);
    assert_eq!(turn.diff.len(), 1);
    assert_eq!(svc.get_session(&id).unwrap().revisions.len(), 1);
    let out = svc.accept_chat(&id, turn.id).unwrap();
    assert_eq!(out.revision.origin, Origin::Chat);
    let (_, spec) = svc.get_docspec(&id).unwrap();
    assert_eq!(docspec_to_json(&spec)["units"][0]["interaction"]["state"][0]["max"], json!(10));
    assert!(matches!(svc.accept_chat(&id, turn.id), Err(ServiceError::BadRequest(_))));

    let turn = svc.chat_edit(&id, "Make C depend on the ratio").unwrap();
    match svc.accept_chat(&id, turn.id) {
        Err(ServiceError::Rejected(t)) => {
            assert_eq!(t.status, TurnStatus::Rejected);
            assert!(t.report.as_ref().unwrap().mentions("cycle"));
        }
        other => panic!("expected rejection, got {other:?}"),
    }
    assert_eq!(svc.get_session(&id).unwrap().revisions.len(), 2);

    let turn = svc.chat_edit(&id, "Widen the radius slider to 10").unwrap();
    let rejected = svc.reject_chat(&id, turn.id).unwrap();
    assert_eq!(rejected.status, TurnStatus::Rejected);
    assert!(!rejected.accepted);
    assert_eq!(svc.get_session(&id).unwrap().chat.len(), 3);
}

#[test]
fn stale_chat_diff_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), ProviderSource::Scripted(scripted("pi")));
    let id = planned(&svc, PI_TOPIC);
    let turn = svc.chat_edit(&id, "Widen the radius slider to 10").unwrap();
    let (_, spec) = svc.get_docspec(&id).unwrap();
    svc.put_docspec(&id, &with_slider_max(&spec, 0, 6.0), None).unwrap();
    assert!(matches!(svc.accept_chat(&id, turn.id), Err(ServiceError::Rejected(_))));
    assert_eq!(svc.get_session(&id).unwrap().revisions.len(), 2);
}

#[test]
fn compile_preview_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), ProviderSource::Scripted(scripted("pi")));
    let spec = load_spec(&spec_path("pi"));
    let interaction = docspec_to_json(&spec)["units"][0]["interaction"].clone();
    let a = svc.compile_preview(&interaction, "preview-1").unwrap();
    let b = svc.compile_preview(&interaction, "preview-1").unwrap();
    assert_eq!(a, b);
    assert!(a.html.contains("type=\"range\""));
    assert!(validate_widget_contract(&a.html, &spec.units[0].interaction).is_empty());

    let mut bad = interaction.clone();
    bad["constraint"]["predicate"] = json!("ratio + 1");
    assert!(matches!(svc.compile_preview(&bad, "p"), Err(ServiceError::Invalid(_))));
    assert!(matches!(svc.compile_preview(&interaction, "1bad"), Err(ServiceError::Invalid(_))));
}

#[test]
fn restart_preserves_revisions_and_document() {
    let dir = tempfile::tempdir().unwrap();
    let source = ProviderSource::Scripted(scripted("pi"));
    let svc = open(dir.path(), source.clone());
    let id = planned(&svc, PI_TOPIC);
    let (_, spec) = svc.get_docspec(&id).unwrap();
    svc.put_docspec(&id, &with_slider_max(&spec, 0, 8.0), Some(1)).unwrap();
    svc.put_docspec(&id, &with_slider_max(&spec, 0, 10.0), Some(2)).unwrap();
    executed(&svc, &id, ExecuteRequest::default());
    let before = svc.get_session(&id).unwrap();
    let doc = svc.get_document(&id).unwrap();
    let bodies: Vec<_> = (1..=3).map(|n| svc.get_revision(&id, n).unwrap()).collect();
    shutdown(svc);

    let svc = open(dir.path(), source);
    let after = svc.get_session(&id).unwrap();
    assert_eq!(after.revisions, before.revisions);
    assert_eq!(after.document, before.document);
    assert_eq!(svc.get_document(&id).unwrap(), doc);
    let reloaded: Vec<_> = (1..=3).map(|n| svc.get_revision(&id, n).unwrap()).collect();
    assert_eq!(reloaded, bodies);
    assert_ne!(svc.create_session(PI_TOPIC).unwrap().id, id);
}

#[test]
fn shutdown_mid_job_marks_it_restartable() {
    let dir = tempfile::tempdir().unwrap();
    let base: Arc<dyn Provider> = Arc::new(ScriptedProvider::from_dir(&scripted("pi")).unwrap());
    let gate = common::Gate::new(base, Stage::Text);
    let svc = open(dir.path(), ProviderSource::Fixed(gate.clone()));
    let id = planned(&svc, PI_TOPIC);
    svc.execute_session(&id, ExecuteRequest::default()).unwrap();
    gate.wait_for_caller();
    svc.shutdown();
    assert!(matches!(svc.create_session("x"), Err(ServiceError::ShuttingDown)));
    let job = svc.job(&id).unwrap().unwrap();
    assert_eq!(job.status, JobStatus::Failed);
    assert!(job.restartable);
    assert_eq!(job.error.as_ref().unwrap()["error"], "interrupted");
    gate.open();
    svc.join_workers();
    let job = svc.job(&id).unwrap().unwrap();
    assert_eq!(job.status, JobStatus::Failed, "late results must be discarded");
    assert!(svc.get_session(&id).unwrap().document.is_none());
    drop(svc);

    let svc = open(dir.path(), ProviderSource::Scripted(scripted("pi")));
    let restarted = svc.restart_job(&id).unwrap();
    assert_eq!(restarted.kind, JobKind::Execute);
    let job = wait_idle(&svc, &id);
    assert_eq!(job.status, JobStatus::Done);
    assert!(svc.get_document(&id).is_ok());
}

#[test]
fn startup_recovers_jobs_left_running() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path(), ProviderSource::Scripted(scripted("pi")));
    let id = planned(&svc, PI_TOPIC);
    shutdown(svc);

    let store = Store::open(dir.path()).unwrap();
    let mut s = store.load(&id).unwrap();
    let mut job = s.job.clone().unwrap();
    job.id += 1;
    job.kind = JobKind::Execute;
    job.status = JobStatus::Running;
    job.revision = Some(1);
    job.finished_at = None;
    s.jobs_started += 1;
    s.job = Some(job);
    store.save(&s).unwrap();

    let svc = open(dir.path(), ProviderSource::Scripted(scripted("pi")));
    let job = svc.job(&id).unwrap().unwrap();
    assert_eq!((job.status, job.restartable), (JobStatus::Failed, true));
}

#[test]
fn scripted_endpoints_are_deterministic_across_services() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let svc = open(dir.path(), ProviderSource::Scripted(scripted("matrix-rank")));
        let id = planned(&svc, RANK_TOPIC);
        executed(&svc, &id, ExecuteRequest::default());
        let eval = svc.evaluate_session(&id).unwrap();
        let turn = svc.chat_edit(&id, "Let the scale slider reach 4").unwrap();
        (svc.get_document(&id).unwrap(), eval, turn.diff)
    };
    assert_eq!(run(), run());
}

mod http {
    use super::*;
    use axum::body::Body;
    use axum::http::{header, Request, StatusCode};
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    struct Api {
        router: axum::Router,
        svc: Arc<SessionService>,
        _dir: tempfile::TempDir,
    }

    impl Api {
        fn new(fixture: &str) -> Api {
            let dir = tempfile::tempdir().unwrap();
            let svc = open(dir.path(), ProviderSource::Scripted(scripted(fixture)));
            Api {
                router: router(svc.clone(), true),
                svc,
                _dir: dir,
            }
        }

        async fn call(
            &self,
            method: &str,
            uri: &str,
            body: Option<Value>,
            headers: &[(&str, &str)],
        ) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
            let mut req = Request::builder().method(method).uri(uri);
            for (k, v) in headers {
                req = req.header(*k, *v);
            }
            let body = match body {
                Some(v) => {
                    req = req.header(header::CONTENT_TYPE, "application/json");
                    Body::from(serde_json::to_vec(&v).unwrap())
                }
                None => Body::empty(),
            };
            let resp = self.router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
            let status = resp.status();
            let headers = resp.headers().clone();
            let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
            (status, headers, bytes)
        }

        async fn json(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
            let (s, _, b) = self.call(method, uri, body, &[]).await;
            (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
        }

        async fn wait(&self, id: &str) -> Value {
            let deadline = Instant::now() + Duration::from_secs(20);
            loop {
                let (s, job) = self.json("GET", &format!("/sessions/{id}/job"), None).await;
                assert_eq!(s, StatusCode::OK);
                if job["status"] == "done" || job["status"] == "failed" {
                    return job;
                }
                assert!(Instant::now() < deadline);
                tokio::time::sleep(Duration::from_millis(5)).await;
            }
        }
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 2)]
    async fn health_and_schema() {
        let api = Api::new("pi");
        let (s, body) = api.json("GET", "/health", None).await;
        assert_eq!((s, body["status"].clone()), (StatusCode::OK, json!("ok")));
        let (s, h, b) = api.call("GET", "/schema", None, &[]).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(h[header::CONTENT_TYPE], "application/schema+json");
        let schema: Value = serde_json::from_slice(&b).unwrap();
        assert_eq!(schema["title"], "DocSpec");
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 2)]
    async fn full_workflow_over_http() {
        let api = Api::new("pi");
        let (s, body) = api.json("POST", "/sessions", Some(json!({"topic": ""}))).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(body["report"][0]["path"], "/topic");

        let (s, h, b) = api.call("POST", "/sessions", Some(json!({"topic": PI_TOPIC})), &[]).await;
        assert_eq!(s, StatusCode::CREATED);
        let session: Value = serde_json::from_slice(&b).unwrap();
        let id = session["id"].as_str().unwrap().to_string();
        assert_eq!(h[header::LOCATION], format!("/sessions/{id}").as_str());
        assert_eq!(api.wait(&id).await["status"], "done");

        let (s, h, b) = api.call("GET", &format!("/sessions/{id}/docspec"), None, &[]).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(h[header::ETAG], "\"1\"");
        let mut spec: Value = serde_json::from_slice(&b).unwrap();
        spec["units"][0]["interaction"]["state"][0]["max"] = json!(10);

        let (s, h, b) = api
            .call("PUT", &format!("/sessions/{id}/docspec"), Some(spec.clone()), &[("if-match", "\"1\"")])
            .await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(h[header::ETAG], "\"2\"");
        let out: Value = serde_json::from_slice(&b).unwrap();
        assert_eq!(out["diff"].as_array().unwrap().len(), 1);
        assert_eq!(out["diff"][0]["path"], "/interaction/state/0/max");

        let (s, _, b) = api
            .call("PUT", &format!("/sessions/{id}/docspec"), Some(spec.clone()), &[("if-match", "\"1\"")])
            .await;
        assert_eq!(s, StatusCode::CONFLICT);
        assert_eq!(serde_json::from_slice::<Value>(&b).unwrap()["error"], "conflict");

        let mut cyclic = spec.clone();
        cyclic["units"][0]["interaction"]["state"][1]["formula"] = json!("ratio*D");
        let (s, body) = api.json("PUT", &format!("/sessions/{id}/docspec"), Some(cyclic)).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
        assert!(body["report"][0]["message"].as_str().unwrap().contains("cycle"));

        let (s, body) = api.json("GET", &format!("/sessions/{id}/document"), None).await;
        assert_eq!((s, body["error"].clone()), (StatusCode::CONFLICT, json!("not_ready")));

        let (s, _) = api.json("POST", &format!("/sessions/{id}/execute"), None).await;
        assert_eq!(s, StatusCode::ACCEPTED);
        assert_eq!(api.wait(&id).await["status"], "done");
        let (s, h, html) = api.call("GET", &format!("/sessions/{id}/document"), None, &[]).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(h[header::CONTENT_TYPE], "text/html; charset=utf-8");
        assert!(String::from_utf8(html).unwrap().starts_with("<!DOCTYPE html>"));

        let (s, eval) = api.json("POST", &format!("/sessions/{id}/evaluate"), None).await;
        assert_eq!((s, eval["verdict"].clone()), (StatusCode::OK, json!("pass")));
        let (s, stored) = api.json("GET", &format!("/sessions/{id}/evaluation"), None).await;
        assert_eq!((s, stored), (StatusCode::OK, eval));

        let (s, revs) = api.json("GET", &format!("/sessions/{id}/revisions"), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(revs["revisions"].as_array().unwrap().len(), 2);
        let (s, first) = api.json("GET", &format!("/sessions/{id}/revisions/1"), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(first["units"][0]["interaction"]["state"][0]["max"], json!(5));
        let (s, _) = api.json("GET", &format!("/sessions/{id}/revisions/9"), None).await;
        assert_eq!(s, StatusCode::NOT_FOUND);

        let (s, list) = api.json("GET", "/sessions", None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(list["sessions"][0]["id"], json!(id));
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 2)]
    async fn chat_over_http() {
        let api = Api::new("pi");
        let (_, session) = api.json("POST", "/sessions", Some(json!({"topic": PI_TOPIC}))).await;
        let id = session["id"].as_str().unwrap().to_string();
        api.wait(&id).await;
        let (s, turn) = api
            .json("POST", &format!("/sessions/{id}/chat"), Some(json!({"message": "Make C depend on the ratio"})))
            .await;
        assert_eq!(s, StatusCode::CREATED);
        let (s, body) = api.json("POST", &format!("/sessions/{id}/chat/{}/accept", turn["id"]), None).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(body["turn"]["status"], "rejected");

        let (_, turn) = api
            .json("POST", &format!("/sessions/{id}/chat"), Some(json!({"message": "Widen the radius slider to 10"})))
            .await;
        assert_eq!(turn["diff"][0]["new"], json!(10));
        let (s, h, _) = api.call("POST", &format!("/sessions/{id}/chat/{}/accept", turn["id"]), None, &[]).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(h[header::ETAG], "\"2\"");
        let (s, _) = api.json("POST", &format!("/sessions/{id}/chat/99/reject"), None).await;
        assert_eq!(s, StatusCode::NOT_FOUND);
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 2)]
    async fn compile_endpoint_and_errors() {
        let api = Api::new("pi");
        let spec = load_spec(&spec_path("pi"));
        let interaction = docspec_to_json(&spec)["units"][0]["interaction"].clone();
        let req = json!({"interaction": interaction, "container_id": "preview-7"});
        let (s, a) = api.json("POST", "/compile", Some(req.clone())).await;
        assert_eq!(s, StatusCode::OK);
        let (_, b) = api.json("POST", "/compile", Some(req)).await;
        assert_eq!(a, b);
        assert!(a["html"].as_str().unwrap().contains("id=\"preview-7\""));

        let (s, body) = api.json("POST", "/compile", Some(json!({"interaction": {"state": []}}))).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(body["error"], "invalid");

        let (s, _, _) = api.call("POST", "/compile", None, &[]).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

        let (s, body) = api.json("GET", "/sessions/s999999", None).await;
        assert_eq!((s, body["error"].clone()), (StatusCode::NOT_FOUND, json!("not_found")));
        let (s, _) = api.json("GET", "/sessions/..%2F..%2Fetc", None).await;
        assert_eq!(s, StatusCode::NOT_FOUND);

        let (s, h, _) = api
            .call("OPTIONS", "/sessions", None, &[("origin", "http://localhost:5173"), ("access-control-request-method", "POST")])
            .await;
        assert!(s.is_success());
        assert!(h.contains_key(header::ACCESS_CONTROL_ALLOW_ORIGIN));
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 2)]
    async fn execute_conflict_codes() {
        let dir = tempfile::tempdir().unwrap();
        let base: Arc<dyn Provider> = Arc::new(ScriptedProvider::from_dir(&scripted("pi")).unwrap());
        let gate = common::Gate::new(base, Stage::Text);
        let svc = open(dir.path(), ProviderSource::Fixed(gate.clone()));
        let api = Api {
            router: router(svc.clone(), false),
            svc,
            _dir: dir,
        };
        let (_, session) = api.json("POST", "/sessions", Some(json!({"topic": PI_TOPIC}))).await;
        let id = session["id"].as_str().unwrap().to_string();
        api.wait(&id).await;
        let (s, _) = api.json("POST", &format!("/sessions/{id}/execute"), Some(json!({"mode": "llm"}))).await;
        assert_eq!(s, StatusCode::ACCEPTED);
        let g = gate.clone();
        tokio::task::spawn_blocking(move || g.wait_for_caller()).await.unwrap();
        let (s, body) = api.json("POST", &format!("/sessions/{id}/execute"), None).await;
        assert_eq!((s, body["error"].clone()), (StatusCode::CONFLICT, json!("job_in_progress")));
        let (s, body) = api.json("POST", &format!("/sessions/{id}/execute"), Some(json!({"bogus": 1}))).await;
        assert_eq!((s, body["error"].clone()), (StatusCode::UNPROCESSABLE_ENTITY, json!("invalid")));
        gate.open();
        let job = api.wait(&id).await;
        assert_eq!(job["mode"], "llm");
        let svc = api.svc.clone();
        tokio::task::spawn_blocking(move || svc.shutdown()).await.unwrap();
        let (s, _) = api.json("POST", "/sessions", Some(json!({"topic": "x"}))).await;
        assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    }
}

mod immutability {
    use super::*;
    use proptest::prelude::*;

    #[derive(Debug, Clone)]
    enum Edit {
        Max(u8),
        Cycle,
        Stale,
    }

    fn edit() -> impl Strategy<Value = Edit> {
        prop_oneof![
            3 => (6u8..=20).prop_map(Edit::Max),
            1 => Just(Edit::Cycle),
            1 => Just(Edit::Stale),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn revisions_only_grow(edits in proptest::collection::vec(edit(), 1..6)) {
            let dir = tempfile::tempdir().unwrap();
            let svc = open(dir.path(), ProviderSource::Scripted(scripted("pi")));
            let id = planned(&svc, PI_TOPIC);
            let (_, base) = svc.get_docspec(&id).unwrap();
            let mut snapshots: Vec<Vec<u8>> = Vec::new();
            let rev_file = |n: u64| dir.path().join("sessions").join(&id).join("revisions").join(format!("{n:04}.docspec.json"));
            snapshots.push(std::fs::read(rev_file(1)).unwrap());
            for e in edits {
                let current = svc.get_session(&id).unwrap().revisions.len() as u64;
                let result = match e {
                    Edit::Max(m) => svc.put_docspec(&id, &with_slider_max(&base, 0, m as f64), Some(current)),
                    Edit::Cycle => {
                        let mut v = docspec_to_json(&base);
                        v["units"][0]["interaction"]["state"][1]["formula"] = json!("ratio*D");
                        svc.put_docspec(&id, &v, Some(current))
                    }
                    Edit::Stale => svc.put_docspec(&id, &with_slider_max(&base, 0, 9.0), Some(current + 1)),
                };
                let after = svc.get_session(&id).unwrap().revisions.len() as u64;
                match result {
                    Ok(out) => {
                        prop_assert_eq!(after, current + 1);
                        prop_assert_eq!(out.revision.id, after);
                        snapshots.push(std::fs::read(rev_file(after)).unwrap());
                    }
                    Err(_) => prop_assert_eq!(after, current),
                }
                for (i, bytes) in snapshots.iter().enumerate() {
                    prop_assert_eq!(&std::fs::read(rev_file(i as u64 + 1)).unwrap(), bytes);
                }
            }
            shutdown(svc);
        }
    }
}
