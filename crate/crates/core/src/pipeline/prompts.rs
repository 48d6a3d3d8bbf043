use super::provider::Stage;

pub const PROMPT_VERSION: &str = "v1";

/// Marker substituted for the context of the first section.
pub const NO_PRIOR_SECTIONS: &str = "[no prior sections]";

const PLAN: &str = include_str!("../../prompts/v1/plan.txt");
const TEXT: &str = include_str!("../../prompts/v1/text.txt");
const WIDGET: &str = include_str!("../../prompts/v1/widget.txt");
const COHERENCE: &str = include_str!("../../prompts/v1/coherence.txt");
const NAIVE: &str = include_str!("../../prompts/v1/naive.txt");
const CHAT: &str = include_str!("../../prompts/v1/chat.txt");

pub const PLAN_FORMAT: &str = include_str!("../../prompts/v1/plan.format.json");
pub const COHERENCE_FORMAT: &str = include_str!("../../prompts/v1/coherence.format.json");
pub const CHAT_FORMAT: &str = include_str!("../../prompts/v1/chat.format.json");

pub fn template(stage: Stage) -> &'static str {
    match stage {
        Stage::Plan => PLAN,
        Stage::Text => TEXT,
        Stage::Widget => WIDGET,
        Stage::Coherence => COHERENCE,
        Stage::Naive => NAIVE,
        Stage::Chat => CHAT,
    }
}

/// Name of the structured output format a stage is asked for.
pub fn schema_name(stage: Stage) -> Option<String> {
    match stage {
        Stage::Plan => Some("docspec".into()),
        Stage::Coherence => Some("coherence".into()),
        Stage::Chat => Some("docspec-diff".into()),
        _ => None,
    }
}

/// Fills `{{name}}` placeholders in one pass, so substituted values are
/// never re-expanded. Unknown placeholders are left as written.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let name = &after[..end];
                match vars.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => out.push_str(&rest[start..start + 2 + end + 2]),
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Feedback paragraph appended after a failed attempt.
pub fn feedback(previous: Option<&str>) -> String {
    match previous {
        None => String::new(),
        Some(report) => format!(
            "\nYour previous reply was rejected by the validator:\n{report}\nFix every listed problem and reply again.\n"
        ),
    }
}
