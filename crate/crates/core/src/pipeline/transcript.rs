use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use super::provider::{CompletionRequest, Provider, ProviderError, Stage};

#[derive(Serialize)]
struct Line<'a> {
    seq: usize,
    provider: String,
    stage: Stage,
    key: &'a str,
    prompt: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Wraps a provider and appends every request/response pair to a JSONL file.
pub struct TranscriptProvider {
    inner: Arc<dyn Provider>,
    out: Mutex<(File, usize)>,
}

impl TranscriptProvider {
    pub fn new(inner: Arc<dyn Provider>, path: &Path) -> std::io::Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(TranscriptProvider {
            inner,
            out: Mutex::new((file, 0)),
        })
    }
}

impl Provider for TranscriptProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        let result = self.inner.complete(req);
        let mut guard = self.out.lock().expect("transcript lock");
        guard.1 += 1;
        let line = Line {
            seq: guard.1,
            provider: self.inner.identity(),
            stage: req.stage,
            key: &req.key,
            prompt: &req.prompt,
            response: result.as_ref().ok().map(String::as_str),
            error: result.as_ref().err().map(ToString::to_string),
        };
        let mut text = serde_json::to_string(&line).expect("transcript line serializes");
        text.push('\n');
        guard
            .0
            .write_all(text.as_bytes())
            .map_err(|e| ProviderError::Io(format!("transcript: {e}")))?;
        result
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }
}
