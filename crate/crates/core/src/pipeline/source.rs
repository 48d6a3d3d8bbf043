use std::path::PathBuf;
use std::sync::Arc;

use super::http::{HttpConfig, HttpProvider};
use super::provider::{Provider, ProviderError};
use super::scripted::ScriptedProvider;

/// Where providers come from. Scripted sources reload their fixtures for
/// every run, so each run sees fresh attempt counters.
#[derive(Clone)]
pub enum ProviderSource {
    Scripted(PathBuf),
    Http(HttpConfig),
    Fixed(Arc<dyn Provider>),
}

impl std::fmt::Debug for ProviderSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProviderSource::Scripted(p) => write!(f, "Scripted({})", p.display()),
            ProviderSource::Http(c) => write!(f, "Http({}, {})", c.url, c.model),
            ProviderSource::Fixed(p) => write!(f, "Fixed({})", p.identity()),
        }
    }
}

impl ProviderSource {
    /// Fixtures when given, otherwise a configured endpoint. Having neither
    /// is an error: nothing ever falls back to the network implicitly.
    pub fn resolve(fixtures: Option<PathBuf>) -> Result<ProviderSource, ProviderError> {
        if let Some(dir) = fixtures {
            return Ok(ProviderSource::Scripted(dir));
        }
        match HttpConfig::from_env()? {
            Some(cfg) => Ok(ProviderSource::Http(cfg)),
            None => Err(ProviderError::Config(format!(
                "no provider configured: pass a fixture directory or set {}",
                super::http::ENV_URL
            ))),
        }
    }

    pub fn make(&self) -> Result<Arc<dyn Provider>, ProviderError> {
        Ok(match self {
            ProviderSource::Scripted(dir) => Arc::new(ScriptedProvider::from_dir(dir)?),
            ProviderSource::Http(cfg) => Arc::new(HttpProvider::new(cfg.clone())?),
            ProviderSource::Fixed(p) => p.clone(),
        })
    }

    pub fn is_scripted(&self) -> bool {
        matches!(self, ProviderSource::Scripted(_))
    }
}
