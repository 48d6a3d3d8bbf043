use std::collections::{HashMap, HashSet};
use std::thread;

use serde::Serialize;

use super::document::{assemble_document, Document, GenerationMetadata};
use super::evaluator::Directive;
use super::prompts::{self, NO_PRIOR_SECTIONS};
use super::{
    with_retries, GeneratedUnit, PipelineConfig, PipelineError, Provider, Providers, Stage, UnitStatus, WidgetMode,
};
use crate::docspec::{interaction_to_json, validate_docspec, DocSpec, KnowledgeUnit};
use crate::html::{extract_text, tokenize, validate_fragment, Attr, Token};
use crate::report::{ValidationReport, ViolationKind};
use crate::widget::{compile_widget, validate_widget_contract};

#[derive(Debug, Clone, PartialEq)]
pub struct TextOutcome {
    pub fragment: String,
    pub attempts: usize,
    pub reports: Vec<ValidationReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidgetOutcome {
    pub fragment: String,
    /// Provider calls made; zero in deterministic mode.
    pub attempts: usize,
    /// The compiler produced the widget after the provider's attempts ran out.
    pub fallback: bool,
    pub reports: Vec<ValidationReport>,
}

/// A stage finishing for one unit, reported while a run is in flight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Progress {
    pub unit_id: String,
    pub stage: Stage,
    pub attempts: usize,
    pub ok: bool,
    pub reused: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub document: Document,
    pub units: Vec<GeneratedUnit>,
}

pub fn container_id(config: &PipelineConfig, unit_index: usize) -> String {
    format!("{}-{}", config.container_seed, unit_index + 1)
}

/// Prompt context: the extracted prose of earlier sections, in order.
pub fn build_context(sections: &[(&KnowledgeUnit, &str)]) -> String {
    let mut out = String::new();
    for (i, (unit, fragment)) in sections.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        out.push_str(&format!("Section {}: {}\n{}", i + 1, unit.summary, extract_text(fragment)));
    }
    out
}

pub fn execute_unit_text(
    topic: &str,
    unit: &KnowledgeUnit,
    context: &str,
    provider: &dyn Provider,
    config: &PipelineConfig,
) -> Result<TextOutcome, PipelineError> {
    let context = if context.trim().is_empty() { NO_PRIOR_SECTIONS } else { context };
    let out = with_retries(
        provider,
        Stage::Text,
        &unit.id,
        config.max_attempts,
        |fb| {
            prompts::render(
                prompts::template(Stage::Text),
                &[
                    ("topic", topic),
                    ("summary", &unit.summary),
                    ("text_description", &unit.text_description),
                    ("context", context),
                    ("feedback", fb),
                ],
            )
        },
        |reply| {
            let r = validate_fragment(reply, &config.policy);
            if r.is_empty() {
                Ok(reply.to_string())
            } else {
                Err(r)
            }
        },
    )?;
    match out.value {
        Some(fragment) => Ok(TextOutcome {
            fragment,
            attempts: out.attempts,
            reports: out.reports,
        }),
        None => Err(PipelineError::StageFailed {
            unit_id: unit.id.clone(),
            stage: Stage::Text,
            attempts: out.attempts,
            reports: out.reports,
        }),
    }
}

fn root_id(fragment: &str) -> Option<String> {
    let (tokens, _) = tokenize(fragment);
    tokens.into_iter().find_map(|t| match t {
        Token::Start { attrs, .. } => Some(Attr::get(&attrs, "id").unwrap_or_default().to_string()),
        _ => None,
    })
}

fn compile(unit: &KnowledgeUnit, cid: &str) -> Result<String, PipelineError> {
    let w = compile_widget(&unit.interaction, cid).map_err(|source| PipelineError::Compile {
        unit_id: unit.id.clone(),
        source,
    })?;
    let r = validate_widget_contract(&w.html, &unit.interaction);
    if !r.is_empty() {
        return Err(PipelineError::StageFailed {
            unit_id: unit.id.clone(),
            stage: Stage::Widget,
            attempts: 0,
            reports: vec![r],
        });
    }
    Ok(w.html)
}

pub fn execute_unit_widget(
    unit: &KnowledgeUnit,
    provider: &dyn Provider,
    config: &PipelineConfig,
    mode: WidgetMode,
    container_id: &str,
) -> Result<WidgetOutcome, PipelineError> {
    if mode == WidgetMode::Deterministic {
        return Ok(WidgetOutcome {
            fragment: compile(unit, container_id)?,
            attempts: 0,
            fallback: false,
            reports: Vec::new(),
        });
    }
    let interaction = serde_json::to_string_pretty(&interaction_to_json(&unit.interaction))
        .expect("json values always serialize");
    let out = with_retries(
        provider,
        Stage::Widget,
        &unit.id,
        config.max_attempts,
        |fb| {
            prompts::render(
                prompts::template(Stage::Widget),
                &[
                    ("summary", &unit.summary),
                    ("container_id", container_id),
                    ("interaction", &interaction),
                    ("feedback", fb),
                ],
            )
        },
        |reply| {
            let mut r = validate_widget_contract(reply, &unit.interaction);
            if let Some(id) = root_id(reply).filter(|id| id != container_id) {
                r.add(
                    ViolationKind::Semantic,
                    "/",
                    format!("widget root must have id \"{container_id}\", found \"{id}\""),
                );
            }
            if r.is_empty() {
                Ok(reply.to_string())
            } else {
                Err(r)
            }
        },
    )?;
    match out.value {
        Some(fragment) => Ok(WidgetOutcome {
            fragment,
            attempts: out.attempts,
            fallback: false,
            reports: out.reports,
        }),
        None => {
            log::warn!("widget stage for {} exhausted; using the compiler", unit.id);
            Ok(WidgetOutcome {
                fragment: compile(unit, container_id)?,
                attempts: out.attempts,
                fallback: true,
                reports: out.reports,
            })
        }
    }
}

/// Runs every unit and assembles the document.
pub fn execute(spec: &DocSpec, providers: &Providers, config: &PipelineConfig) -> Result<Execution, PipelineError> {
    execute_with(spec, providers, config, None, &|_| {})
}

/// Re-runs only the stages named by `directives`, plus any unit missing
/// from `previous`. Everything else is carried over unchanged.
pub fn reexecute(
    spec: &DocSpec,
    providers: &Providers,
    config: &PipelineConfig,
    previous: &[GeneratedUnit],
    directives: &[Directive],
) -> Result<Execution, PipelineError> {
    execute_with(spec, providers, config, Some((previous, directives)), &|_| {})
}

struct TextDone {
    fragment: String,
    attempts: usize,
}

struct WidgetDone {
    fragment: String,
    attempts: usize,
    fallback: bool,
}

/// Full or partial execution with a progress callback. Text stages run in
/// unit order; each widget stage starts once its unit's text is done.
pub fn execute_with(
    spec: &DocSpec,
    providers: &Providers,
    config: &PipelineConfig,
    previous: Option<(&[GeneratedUnit], &[Directive])>,
    progress: &(dyn Fn(&Progress) + Sync),
) -> Result<Execution, PipelineError> {
    config.check()?;
    let report = validate_docspec(spec);
    if !report.is_empty() {
        return Err(PipelineError::InvalidSpec(report));
    }
    let reuse: HashMap<&str, &GeneratedUnit> = previous
        .map(|(units, _)| {
            units
                .iter()
                .filter(|u| u.status == UnitStatus::Ok)
                .map(|u| (u.unit_id.as_str(), u))
                .collect()
        })
        .unwrap_or_default();
    let directed: HashSet<(&str, Stage)> = previous
        .map(|(_, ds)| ds.iter().map(|d| (d.unit.as_str(), d.stage)).collect())
        .unwrap_or_default();

    let n = spec.units.len();
    let mut texts: Vec<Option<TextDone>> = (0..n).map(|_| None).collect();
    let mut widgets: Vec<Option<Result<WidgetDone, PipelineError>>> = (0..n).map(|_| None).collect();
    let mut text_failure: Option<(usize, PipelineError)> = None;

    thread::scope(|scope| {
        let mut pending = Vec::new();
        for (i, unit) in spec.units.iter().enumerate() {
            let prior = reuse.get(unit.id.as_str()).copied();

            let kept_text = prior
                .filter(|_| !directed.contains(&(unit.id.as_str(), Stage::Text)))
                .and_then(|p| p.text_fragment.clone().map(|f| (f, p.attempts_text)));
            if let Some((fragment, attempts)) = kept_text {
                progress(&Progress {
                    unit_id: unit.id.clone(),
                    stage: Stage::Text,
                    attempts,
                    ok: true,
                    reused: true,
                });
                texts[i] = Some(TextDone { fragment, attempts });
            } else {
                let context = if config.sequential_text {
                    let sections: Vec<(&KnowledgeUnit, &str)> = spec.units[..i]
                        .iter()
                        .zip(&texts)
                        .filter_map(|(u, t)| t.as_ref().map(|t| (u, t.fragment.as_str())))
                        .collect();
                    build_context(&sections)
                } else {
                    String::new()
                };
                match execute_unit_text(&spec.topic, unit, &context, providers.text.as_ref(), config) {
                    Ok(o) => {
                        progress(&Progress {
                            unit_id: unit.id.clone(),
                            stage: Stage::Text,
                            attempts: o.attempts,
                            ok: true,
                            reused: false,
                        });
                        texts[i] = Some(TextDone {
                            fragment: o.fragment,
                            attempts: o.attempts,
                        });
                    }
                    Err(e) => {
                        let attempts = match &e {
                            PipelineError::StageFailed { attempts, .. } => *attempts,
                            _ => 0,
                        };
                        progress(&Progress {
                            unit_id: unit.id.clone(),
                            stage: Stage::Text,
                            attempts,
                            ok: false,
                            reused: false,
                        });
                        text_failure = Some((i, e));
                        break;
                    }
                }
            }

            let cid = container_id(config, i);
            let kept_widget = prior
                .filter(|_| !directed.contains(&(unit.id.as_str(), Stage::Widget)))
                .and_then(|p| p.widget_fragment.as_ref().map(|f| (f, p)))
                .filter(|(f, _)| root_id(f).as_deref() == Some(cid.as_str()));
            if let Some((fragment, p)) = kept_widget {
                progress(&Progress {
                    unit_id: unit.id.clone(),
                    stage: Stage::Widget,
                    attempts: p.attempts_widget,
                    ok: true,
                    reused: true,
                });
                widgets[i] = Some(Ok(WidgetDone {
                    fragment: fragment.clone(),
                    attempts: p.attempts_widget,
                    fallback: p.widget_fallback,
                }));
                continue;
            }
            let run = move || {
                let r = execute_unit_widget(unit, providers.widget.as_ref(), config, config.widget_mode, &cid);
                progress(&Progress {
                    unit_id: unit.id.clone(),
                    stage: Stage::Widget,
                    attempts: r.as_ref().map_or(0, |o| o.attempts),
                    ok: r.is_ok(),
                    reused: false,
                });
                r.map(|o| WidgetDone {
                    fragment: o.fragment,
                    attempts: o.attempts,
                    fallback: o.fallback,
                })
            };
            if config.parallel_widgets {
                pending.push((i, scope.spawn(run)));
            } else {
                widgets[i] = Some(run());
            }
        }
        for (i, handle) in pending {
            widgets[i] = Some(handle.join().expect("widget worker panicked"));
        }
    });

    let mut units = Vec::with_capacity(n);
    let stop = text_failure.as_ref().map_or(n, |(i, _)| *i);
    for (i, unit) in spec.units.iter().enumerate().take(stop) {
        let text = texts[i].take().expect("text finished before the failure point");
        let widget = match widgets[i].take().expect("widget stage ran for every finished text") {
            Ok(w) => w,
            Err(cause) => {
                return Err(PipelineError::ExecutionFailed {
                    unit_id: unit.id.clone(),
                    unit_index: i,
                    cause: Box::new(cause),
                    completed: units,
                })
            }
        };
        units.push(
            GeneratedUnit {
                unit_id: unit.id.clone(),
                text_fragment: Some(text.fragment),
                widget_fragment: Some(widget.fragment),
                attempts_text: text.attempts,
                attempts_widget: widget.attempts,
                widget_fallback: widget.fallback,
                status: UnitStatus::Ok,
                failure_reasons: Vec::new(),
            }
            .settle(),
        );
    }
    if let Some((i, cause)) = text_failure {
        return Err(PipelineError::ExecutionFailed {
            unit_id: spec.units[i].id.clone(),
            unit_index: i,
            cause: Box::new(cause),
            completed: units,
        });
    }

    let metadata = GenerationMetadata::new(config, providers, &units);
    let document = assemble_document(spec, &units, &metadata);
    Ok(Execution { document, units })
}

#[cfg(test)]
mod tests {
    use std::sync::{Arc, Mutex};

    use super::*;
    use crate::docspec::test_support::pi_spec;
    use crate::pipeline::ScriptedProvider;

    fn text_provider() -> ScriptedProvider {
        ScriptedProvider::new().with(Stage::Text, "pi-ratio", "<div><p>Every circle has the same ratio.</p></div>")
    }

    #[test]
    fn first_unit_gets_marker() {
        let spec = pi_spec();
        let p = text_provider();
        let seen = Arc::new(Mutex::new(String::new()));
        struct Spy<'a>(&'a ScriptedProvider, Arc<Mutex<String>>);
        impl Provider for Spy<'_> {
            fn complete(&self, req: &super::super::CompletionRequest) -> Result<String, super::super::ProviderError> {
                *self.1.lock().unwrap() = req.prompt.clone();
                self.0.complete(req)
            }
            fn identity(&self) -> String {
                "spy".into()
            }
            fn is_deterministic(&self) -> bool {
                true
            }
        }
        let spy = Spy(&p, seen.clone());
        let out = execute_unit_text(&spec.topic, &spec.units[0], "", &spy, &PipelineConfig::default()).unwrap();
        assert_eq!(out.attempts, 1);
        assert!(seen.lock().unwrap().contains(NO_PRIOR_SECTIONS));
    }

    #[test]
    fn text_retry_and_exhaustion() {
        let spec = pi_spec();
        let p = text_provider().with_faults(Stage::Text, "pi-ratio", [1]);
        let out = execute_unit_text(&spec.topic, &spec.units[0], "", &p, &PipelineConfig::default()).unwrap();
        assert_eq!(out.attempts, 2);

        let p = text_provider().with_faults(Stage::Text, "pi-ratio", [1, 2, 3]);
        let err = execute_unit_text(&spec.topic, &spec.units[0], "", &p, &PipelineConfig::default()).unwrap_err();
        assert!(matches!(err, PipelineError::StageFailed { attempts: 3, stage: Stage::Text, .. }));
        assert_eq!(p.calls(Stage::Text, "pi-ratio"), 3);
    }

    #[test]
    fn widget_fallback_after_bad_fragments() {
        let spec = pi_spec();
        let unit = &spec.units[0];
        let p = ScriptedProvider::new().with(
            Stage::Widget,
            "pi-ratio",
            "<div id=\"w-1\"><input type=\"range\"><script>r; C; D;</script></div>",
        );
        let cfg = PipelineConfig {
            max_attempts: 2,
            ..Default::default()
        };
        let out = execute_unit_widget(unit, &p, &cfg, WidgetMode::Llm, "w-1").unwrap();
        assert!(out.fallback);
        assert_eq!(out.attempts, 2);
        assert!(out.reports[0].mentions("state variable ratio not referenced"));
        assert_eq!(out.fragment, compile_widget(&unit.interaction, "w-1").unwrap().html);
        assert_eq!(p.calls(Stage::Widget, "pi-ratio"), 2);
    }

    #[test]
    fn widget_from_provider() {
        let spec = pi_spec();
        let unit = &spec.units[0];
        let good = compile_widget(&unit.interaction, "w-1").unwrap().html;
        let p = ScriptedProvider::new().with(Stage::Widget, "pi-ratio", good.clone());
        let out = execute_unit_widget(unit, &p, &PipelineConfig::default(), WidgetMode::Llm, "w-1").unwrap();
        assert!(!out.fallback);
        assert_eq!(out.attempts, 1);
        assert_eq!(out.fragment, good.trim_end());

        let err = execute_unit_widget(unit, &p, &PipelineConfig::default(), WidgetMode::Llm, "w-9").unwrap();
        assert!(err.fallback, "root id must match the container");
    }

    #[test]
    fn context_lists_prior_sections() {
        let spec = pi_spec();
        let ctx = build_context(&[(&spec.units[0], "<div><p>Alpha <b>beta</b></p></div>")]);
        assert!(ctx.starts_with("Section 1: "));
        assert!(ctx.contains("Alpha beta"));
    }
}
