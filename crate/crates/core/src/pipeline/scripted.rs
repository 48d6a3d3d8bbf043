//! Fixture-backed provider for hermetic runs.
//!
//! A fixture directory holds one file per (stage, key):
//!
//! ```text
//! <dir>/plan/<topic-slug>.json
//! <dir>/text/<unit-id>.html
//! <dir>/text/<unit-id>.2.html      response for attempt 2 only
//! <dir>/widget/<unit-id>.html
//! <dir>/faults.json                {"text/unit-2": [1, 2]}
//! ```
//!
//! An attempt-specific file wins over the plain one. A fault entry makes the
//! listed attempts return deliberately invalid output for that stage.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::Serialize;

use super::provider::{CompletionRequest, Provider, ProviderError, Stage};

/// One recorded provider call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditEntry {
    pub stage: Stage,
    pub key: String,
    pub attempt: usize,
    pub faulted: bool,
}

type Key = (Stage, String);

#[derive(Debug, Default)]
pub struct ScriptedProvider {
    responses: HashMap<Key, String>,
    per_attempt: HashMap<(Stage, String, usize), String>,
    faults: HashMap<Key, BTreeSet<usize>>,
    counters: Mutex<HashMap<Key, usize>>,
    audit: Mutex<Vec<AuditEntry>>,
}

/// Invalid output returned on a scheduled fault.
pub fn fault_output(stage: Stage) -> &'static str {
    match stage {
        Stage::Text => "<div><p>injected fault</div>",
        Stage::Widget => "<div>injected fault</div>",
        Stage::Naive => "<html><body>injected fault</html>",
        Stage::Plan | Stage::Coherence | Stage::Chat => "{\"injected\": \"fault\"",
    }
}

impl ScriptedProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, stage: Stage, key: &str, response: impl Into<String>) -> Self {
        self.responses.insert((stage, key.to_string()), response.into());
        self
    }

    pub fn with_attempt(mut self, stage: Stage, key: &str, attempt: usize, response: impl Into<String>) -> Self {
        self.per_attempt.insert((stage, key.to_string(), attempt), response.into());
        self
    }

    /// Schedules invalid output on the given attempts (1-based).
    pub fn with_faults(mut self, stage: Stage, key: &str, attempts: impl IntoIterator<Item = usize>) -> Self {
        self.faults.entry((stage, key.to_string())).or_default().extend(attempts);
        self
    }

    /// Loads every fixture under `dir`. Files outside the stage directories
    /// and stage files with other extensions are ignored.
    pub fn from_dir(dir: &Path) -> Result<Self, ProviderError> {
        let io = |p: &Path, e: std::io::Error| ProviderError::Io(format!("{}: {e}", p.display()));
        if !dir.is_dir() {
            return Err(ProviderError::Config(format!(
                "fixture directory {} does not exist",
                dir.display()
            )));
        }
        let mut p = Self::new();
        for stage in Stage::ALL {
            let sd = dir.join(stage.as_str());
            if !sd.is_dir() {
                continue;
            }
            let mut entries: Vec<_> = fs::read_dir(&sd)
                .map_err(|e| io(&sd, e))?
                .collect::<Result<_, _>>()
                .map_err(|e| io(&sd, e))?;
            entries.sort_by_key(|e| e.file_name());
            for entry in entries {
                let path = entry.path();
                let name = entry.file_name().to_string_lossy().into_owned();
                let Some(stem) = name.strip_suffix(&format!(".{}", stage.extension())) else {
                    continue;
                };
                let text = fs::read_to_string(&path).map_err(|e| io(&path, e))?;
                match stem.rsplit_once('.') {
                    Some((key, n)) if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) => {
                        let attempt = n.parse().map_err(|_| {
                            ProviderError::Config(format!("bad attempt number in {}", path.display()))
                        })?;
                        p.per_attempt.insert((stage, key.to_string(), attempt), text);
                    }
                    _ => {
                        p.responses.insert((stage, stem.to_string()), text);
                    }
                }
            }
        }
        let faults_path = dir.join("faults.json");
        if faults_path.is_file() {
            let text = fs::read_to_string(&faults_path).map_err(|e| io(&faults_path, e))?;
            let table: BTreeMap<String, Vec<usize>> = serde_json::from_str(&text)
                .map_err(|e| ProviderError::Config(format!("{}: {e}", faults_path.display())))?;
            for (k, attempts) in table {
                let (stage, key) = k
                    .split_once('/')
                    .and_then(|(s, key)| Stage::from_name(s).map(|st| (st, key)))
                    .ok_or_else(|| {
                        ProviderError::Config(format!("fault key '{k}' must look like <stage>/<key>"))
                    })?;
                p = p.with_faults(stage, key, attempts);
            }
        }
        Ok(p)
    }

    /// Calls made so far for (stage, key).
    pub fn calls(&self, stage: Stage, key: &str) -> usize {
        let counters = self.counters.lock().expect("counter lock");
        counters.get(&(stage, key.to_string())).copied().unwrap_or(0)
    }

    pub fn total_calls(&self) -> usize {
        self.audit.lock().expect("audit lock").len()
    }

    /// Every call in arrival order.
    pub fn audit(&self) -> Vec<AuditEntry> {
        self.audit.lock().expect("audit lock").clone()
    }

    pub fn reset(&self) {
        self.counters.lock().expect("counter lock").clear();
        self.audit.lock().expect("audit lock").clear();
    }
}

impl Provider for ScriptedProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        let key = (req.stage, req.key.clone());
        let attempt = {
            let mut counters = self.counters.lock().expect("counter lock");
            let n = counters.entry(key.clone()).or_insert(0);
            *n += 1;
            *n
        };
        let faulted = self.faults.get(&key).is_some_and(|s| s.contains(&attempt));
        self.audit.lock().expect("audit lock").push(AuditEntry {
            stage: req.stage,
            key: req.key.clone(),
            attempt,
            faulted,
        });
        if faulted {
            return Ok(fault_output(req.stage).to_string());
        }
        self.per_attempt
            .get(&(req.stage, req.key.clone(), attempt))
            .or_else(|| self.responses.get(&key))
            .cloned()
            .ok_or(ProviderError::MissingFixture {
                stage: req.stage,
                key: req.key.clone(),
                attempt,
            })
    }

    fn identity(&self) -> String {
        "scripted".into()
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}
