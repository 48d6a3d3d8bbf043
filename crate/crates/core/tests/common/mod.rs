#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};

use docspec::docspec::{parse_docspec, DocSpec};
use docspec::pipeline::{CompletionRequest, Provider, ProviderError, Stage};

pub const RANK_TOPIC: &str = "What is the rank of a matrix?";
pub const PI_TOPIC: &str = "What is π?";

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn spec_path(name: &str) -> PathBuf {
    fixtures().join("specs").join(format!("{name}.docspec.json"))
}

pub fn scripted(name: &str) -> PathBuf {
    fixtures().join("scripted").join(name)
}

pub fn load_spec(path: &std::path::Path) -> DocSpec {
    parse_docspec(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn corpus() -> Vec<(String, DocSpec)> {
    let mut out: Vec<_> = std::fs::read_dir(fixtures().join("specs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".docspec.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), load_spec(&p)))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Holds every call for one stage until [`Gate::open`] is called.
pub struct Gate {
    inner: Arc<dyn Provider>,
    stage: Stage,
    open: Mutex<bool>,
    cv: Condvar,
    pub waiting: Mutex<usize>,
}

impl Gate {
    pub fn new(inner: Arc<dyn Provider>, stage: Stage) -> Arc<Gate> {
        Arc::new(Gate {
            inner,
            stage,
            open: Mutex::new(false),
            cv: Condvar::new(),
            waiting: Mutex::new(0),
        })
    }

    pub fn open(&self) {
        *self.open.lock().unwrap() = true;
        self.cv.notify_all();
    }

    pub fn wait_for_caller(&self) {
        let deadline = std::time::Instant::now() + std::time::Duration::from_secs(10);
        while *self.waiting.lock().unwrap() == 0 {
            assert!(std::time::Instant::now() < deadline, "no call reached the gate");
            std::thread::sleep(std::time::Duration::from_millis(5));
        }
    }
}

impl Provider for Gate {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        if req.stage == self.stage {
            *self.waiting.lock().unwrap() += 1;
            let mut open = self.open.lock().unwrap();
            while !*open {
                open = self.cv.wait(open).unwrap();
            }
        }
        self.inner.complete(req)
    }

    fn identity(&self) -> String {
        format!("gated-{}", self.inner.identity())
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }
}
