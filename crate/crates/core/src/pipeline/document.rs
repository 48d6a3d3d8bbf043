use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::prompts::PROMPT_VERSION;
use super::{GeneratedUnit, PipelineConfig, Providers, UnitStatus};
use crate::docspec::DocSpec;
use crate::html::escape;

pub const METADATA_ELEMENT_ID: &str = "docspec-metadata";

const DOCUMENT_STYLE: &str = "\
body { margin: 0; background: #fafafa; color: #222; font: 17px/1.6 Georgia, 'Times New Roman', serif; }
main.docspec-document { max-width: 760px; margin: 0 auto; padding: 32px 20px 64px; }
main.docspec-document h1 { font-size: 2.1em; line-height: 1.2; margin-bottom: 0.8em; }
section.docspec-unit { margin: 2.5em 0; }
section.docspec-unit h2 { font-size: 1.35em; margin-bottom: 0.5em; }
section.docspec-unit .docspec-widget { margin-top: 1.2em; }
";

/// An assembled page and the unit order it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub title: String,
    pub html: String,
    pub unit_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitMetadata {
    pub id: String,
    pub attempts_text: usize,
    pub attempts_widget: usize,
    pub widget_fallback: bool,
    pub status: UnitStatus,
}

/// Generation record embedded in the page. Holds no timestamps, so scripted
/// runs produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMetadata {
    pub generator: String,
    pub prompt_version: String,
    pub max_attempts: usize,
    pub sequential_text: bool,
    pub widget_mode: String,
    pub grid_points: usize,
    pub cap: usize,
    pub container_seed: String,
    pub providers: BTreeMap<String, String>,
    pub units: Vec<UnitMetadata>,
}

impl GenerationMetadata {
    pub fn new(config: &PipelineConfig, providers: &Providers, units: &[GeneratedUnit]) -> Self {
        GenerationMetadata {
            generator: concat!("docspec ", env!("CARGO_PKG_VERSION")).into(),
            prompt_version: PROMPT_VERSION.into(),
            max_attempts: config.max_attempts,
            sequential_text: config.sequential_text,
            widget_mode: config.widget_mode.as_str().into(),
            grid_points: config.grid_points,
            cap: config.cap,
            container_seed: config.container_seed.clone(),
            providers: providers.identities(),
            units: units
                .iter()
                .map(|u| UnitMetadata {
                    id: u.unit_id.clone(),
                    attempts_text: u.attempts_text,
                    attempts_widget: u.attempts_widget,
                    widget_fallback: u.widget_fallback,
                    status: u.status,
                })
                .collect(),
        }
    }
}

/// JSON safe to embed in a script element.
fn embeddable_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v)
        .expect("metadata serializes")
        .replace('<', "\\u003c")
        .replace('>', "\\u003e")
        .replace('&', "\\u0026")
}

/// Builds the page: one section per unit in spec order, each holding a
/// heading, the text fragment and the widget fragment.
pub fn assemble_document(spec: &DocSpec, units: &[GeneratedUnit], metadata: &GenerationMetadata) -> Document {
    let by_id: BTreeMap<&str, &GeneratedUnit> = units.iter().map(|u| (u.unit_id.as_str(), u)).collect();
    let title = escape(&spec.topic);
    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    html.push_str("<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n");
    html.push_str(&format!("<title>{title}</title>\n<style>\n{DOCUMENT_STYLE}</style>\n</head>\n<body>\n"));
    html.push_str(&format!("<main class=\"docspec-document\">\n<h1>{title}</h1>\n"));
    for unit in &spec.units {
        let id = escape(&unit.id);
        html.push_str(&format!(
            "<section class=\"docspec-unit\" id=\"unit-{id}\" data-unit=\"{id}\">\n<h2>{}</h2>\n",
            escape(&unit.summary)
        ));
        if let Some(g) = by_id.get(unit.id.as_str()) {
            if let Some(t) = &g.text_fragment {
                html.push_str(&format!("<div class=\"docspec-text\">\n{}\n</div>\n", t.trim()));
            }
            if let Some(w) = &g.widget_fragment {
                html.push_str(&format!("<div class=\"docspec-widget\">\n{}\n</div>\n", w.trim()));
            }
        }
        html.push_str("</section>\n");
    }
    html.push_str("</main>\n");
    html.push_str(&format!(
        "<script type=\"application/json\" id=\"{METADATA_ELEMENT_ID}\">\n{}\n</script>\n",
        embeddable_json(metadata)
    ));
    html.push_str("</body>\n</html>\n");
    Document {
        title: spec.topic.clone(),
        html,
        unit_ids: spec.units.iter().map(|u| u.id.clone()).collect(),
    }
}

impl Document {
    /// Unit ids in the order their sections appear in the page.
    pub fn section_order(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut rest = self.html.as_str();
        while let Some(pos) = rest.find("data-unit=\"") {
            let after = &rest[pos + 11..];
            let end = after.find('"').unwrap_or(after.len());
            out.push(crate::html::decode_entities(&after[..end]));
            rest = &after[end..];
        }
        out
    }

    /// The embedded generation metadata, if present and well formed.
    pub fn metadata(&self) -> Option<GenerationMetadata> {
        let open = format!("id=\"{METADATA_ELEMENT_ID}\">");
        let start = self.html.find(&open)? + open.len();
        let end = self.html[start..].find("</script>")? + start;
        serde_json::from_str(&self.html[start..end]).ok()
    }
}
