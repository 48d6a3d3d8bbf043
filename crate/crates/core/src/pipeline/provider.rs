use std::fmt;

use serde::{Deserialize, Serialize};

/// Pipeline stage a provider call belongs to. Scripted fixtures are laid
/// out by stage name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Plan,
    Text,
    Widget,
    Coherence,
    Naive,
    Chat,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Plan,
        Stage::Text,
        Stage::Widget,
        Stage::Coherence,
        Stage::Naive,
        Stage::Chat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Plan => "plan",
            Stage::Text => "text",
            Stage::Widget => "widget",
            Stage::Coherence => "coherence",
            Stage::Naive => "naive",
            Stage::Chat => "chat",
        }
    }

    pub fn from_name(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s)
    }

    /// Fixture file extension for this stage's responses.
    pub fn extension(self) -> &'static str {
        match self {
            Stage::Text | Stage::Widget | Stage::Naive => "html",
            Stage::Plan | Stage::Coherence | Stage::Chat => "json",
        }
    }

    /// Whether responses are structured (JSON) output.
    pub fn is_structured(self) -> bool {
        self.extension() == "json"
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One text-generation request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub stage: Stage,
    /// Stable key identifying the subject (topic slug, unit id, ...).
    pub key: String,
    pub prompt: String,
    /// Name of the output schema when the call expects structured output.
    pub schema: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("no scripted fixture for {stage}/{key} (attempt {attempt})")]
    MissingFixture {
        stage: Stage,
        key: String,
        attempt: usize,
    },
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("provider request failed: {0}")]
    Request(String),
    #[error("provider i/o: {0}")]
    Io(String),
}

/// A text-generation backend. Implementations must tolerate concurrent calls.
pub trait Provider: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError>;
    fn identity(&self) -> String;
    fn is_deterministic(&self) -> bool;
}

/// Fixture key for free text: lowercase ASCII words joined by '-', at most
/// 64 bytes. Text with no usable characters maps to "untitled".
pub fn slug(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    let mut s = out.trim_end_matches('-').to_string();
    if s.len() > 64 {
        s.truncate(64);
        s = s.trim_end_matches('-').to_string();
    }
    if s.is_empty() {
        "untitled".into()
    } else {
        s
    }
}

/// Drops a surrounding Markdown code fence, which chat models often add
/// around structured output.
pub fn strip_code_fence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let body = match rest.find('\n') {
        Some(nl) => &rest[nl + 1..],
        None => return t,
    };
    body.trim_end().strip_suffix("```").map_or(t, str::trim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("What is the rank of a matrix?"), "what-is-the-rank-of-a-matrix");
        assert_eq!(slug("What is π?"), "what-is");
        assert_eq!(slug("  --  "), "untitled");
        let long = slug(&"ab ".repeat(40));
        assert!(long.len() <= 64 && !long.ends_with('-'));
    }

    #[test]
    fn fences() {
        assert_eq!(strip_code_fence("```json\n{\"a\":1}\n```"), "{\"a\":1}");
        assert_eq!(strip_code_fence("  <div></div> "), "<div></div>");
        assert_eq!(strip_code_fence("```html\n<p>x</p>\n```\n"), "<p>x</p>");
        assert_eq!(strip_code_fence("```unterminated"), "```unterminated");
    }

    #[test]
    fn stage_names() {
        for s in Stage::ALL {
            assert_eq!(Stage::from_name(s.as_str()), Some(s));
        }
    }
}
