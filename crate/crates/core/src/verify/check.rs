use std::collections::BTreeMap;

use crate::docspec::{check_interaction_structure, parse_template, Control, Effect, InteractionSpec, RenderPrimitive, TemplatePart};
use crate::expr::{dependency_order, infer_kind, parse_expr, Expr, Kind};
use crate::report::{ValidationReport, Violation, ViolationKind};

/// Where an expression sits and which extra names it may use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Site<'a> {
    Derived,
    Binding,
    Template,
    Plot(&'a str),
    Effect(Kind),
    Predicate,
}

/// An expression source with its pointer path and byte offset within the
/// field (non-zero only for label template parts).
pub(crate) struct Source<'a> {
    pub path: String,
    pub text: &'a str,
    pub offset: usize,
    pub site: Site<'a>,
}

pub(crate) fn sources<'a>(spec: &'a InteractionSpec, r: &mut ValidationReport) -> Vec<Source<'a>> {
    let mut out = Vec::new();
    for (i, v) in spec.state.iter().enumerate() {
        if let Control::Derived { formula } = &v.control {
            out.push(Source {
                path: format!("/state/{i}/formula"),
                text: formula,
                offset: 0,
                site: Site::Derived,
            });
        }
    }
    for (i, p) in spec.render.iter().enumerate() {
        let base = format!("/render/{i}");
        let plot_var = match p {
            RenderPrimitive::Plot { variable, .. } => Some(variable.as_str()),
            _ => None,
        };
        for (suffix, b) in p.bindings() {
            if let crate::docspec::Binding::Expr(text) = b {
                out.push(Source {
                    path: format!("{base}/{suffix}"),
                    text,
                    offset: 0,
                    site: Site::Binding,
                });
            }
        }
        match p {
            RenderPrimitive::Label { text_template, .. } => match parse_template(text_template) {
                Ok(parts) => {
                    for part in parts {
                        if let TemplatePart::Expr { source, offset } = part {
                            let text = &text_template[offset..offset + source.len()];
                            out.push(Source {
                                path: format!("{base}/text_template"),
                                text,
                                offset,
                                site: Site::Template,
                            });
                        }
                    }
                }
                Err(msg) => r.add(
                    ViolationKind::Expression,
                    format!("{base}/text_template"),
                    format!("bad label template: {msg}"),
                ),
            },
            RenderPrimitive::Plot { expr, .. } => out.push(Source {
                path: format!("{base}/expr"),
                text: expr,
                offset: 0,
                site: Site::Plot(plot_var.unwrap_or_default()),
            }),
            _ => {}
        }
    }
    for (i, t) in spec.transitions.iter().enumerate() {
        if let Effect::Map(text) = &t.effect {
            let raw = match spec.variable(&t.control).map(|v| &v.control) {
                Some(Control::Toggle { .. }) => Kind::Boolean,
                _ => Kind::Number,
            };
            out.push(Source {
                path: format!("/transitions/{i}/effect/map"),
                text,
                offset: 0,
                site: Site::Effect(raw),
            });
        }
    }
    if let Some(c) = &spec.constraint {
        out.push(Source {
            path: "/constraint/predicate".into(),
            text: &c.predicate,
            offset: 0,
            site: Site::Predicate,
        });
    }
    out
}

/// Kind of every name an expression may reference, derived variables
/// included once their formulas are known to be well kinded.
pub(crate) fn declared_kinds(spec: &InteractionSpec) -> BTreeMap<String, Option<Kind>> {
    let mut kinds: BTreeMap<String, Option<Kind>> =
        spec.input_kinds().into_iter().map(|(k, v)| (k, Some(v))).collect();
    for (name, _) in spec.derived() {
        kinds.insert(name.to_string(), None);
    }
    kinds
}

/// Checks an interaction spec: structure, expression syntax, references,
/// dependency cycles and kinds. Paths are relative to the spec.
pub fn static_check(spec: &InteractionSpec) -> ValidationReport {
    let mut r = check_interaction_structure(spec);
    let srcs = sources(spec, &mut r);

    let mut parsed: Vec<(usize, Expr)> = Vec::new();
    for (i, s) in srcs.iter().enumerate() {
        if s.text.trim().is_empty() && matches!(s.site, Site::Derived) {
            continue; // already reported by the structural check
        }
        match parse_expr(s.text) {
            Ok(e) => parsed.push((i, e)),
            Err(err) => r.push(
                Violation::new(ViolationKind::Expression, s.path.clone(), err.to_string())
                    .at_offset(s.offset + err.span.start),
            ),
        }
    }

    let mut kinds = declared_kinds(spec);
    let drag_names: Vec<&str> = spec
        .state
        .iter()
        .filter(|v| matches!(v.control, Control::Drag { .. }))
        .map(|v| v.name.as_str())
        .collect();

    let mut clean = vec![false; srcs.len()];
    for (i, e) in &parsed {
        let s = &srcs[*i];
        let mut ok = true;
        e.visit_vars(&mut |name, span| {
            let local = match s.site {
                Site::Plot(v) => name == v,
                Site::Effect(_) => name == "value",
                _ => false,
            };
            if local || kinds.contains_key(name) {
                return;
            }
            ok = false;
            let msg = if drag_names.contains(&name) {
                format!("drag variable {name} must be referenced as {name}.x or {name}.y")
            } else if name == "value" {
                "'value' is only bound inside transition mappings".to_string()
            } else {
                format!("undefined variable {name}")
            };
            r.push(
                Violation::new(ViolationKind::Semantic, s.path.clone(), msg)
                    .at_offset(s.offset + span.start),
            );
        });
        clean[*i] = ok;
    }

    let derived_index: BTreeMap<&str, usize> = spec
        .state
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_controllable())
        .map(|(i, v)| (v.name.as_str(), i))
        .collect();
    let order = match dependency_order(&spec.derived_nodes()) {
        Ok(o) => Some(o),
        Err(cycle) => {
            let at = derived_index.get(cycle.path[0].as_str()).copied().unwrap_or(0);
            r.add(ViolationKind::Semantic, format!("/state/{at}/formula"), cycle.to_string());
            None
        }
    };
    let Some(order) = order else { return r };

    let expr_at = |path: &str| -> Option<(usize, &Expr)> {
        parsed
            .iter()
            .find(|(i, _)| srcs[*i].path == path)
            .map(|(i, e)| (*i, e))
    };
    for name in &order {
        let idx = derived_index[name.as_str()];
        let Some((i, e)) = expr_at(&format!("/state/{idx}/formula")) else {
            continue;
        };
        if !clean[i] || e.free_vars().iter().any(|n| kinds.get(n) == Some(&None)) {
            continue;
        }
        let lookup = |n: &str| kinds.get(n).copied().flatten();
        match infer_kind(e, &lookup) {
            Ok(k) => {
                kinds.insert(name.clone(), Some(k));
            }
            Err(err) => {
                clean[i] = false;
                let v = Violation::new(ViolationKind::Semantic, srcs[i].path.clone(), err.message);
                r.push(match err.span {
                    Some(sp) => v.at_offset(sp.start),
                    None => v,
                });
            }
        }
    }

    for (i, e) in &parsed {
        let s = &srcs[*i];
        if !clean[*i] || s.site == Site::Derived {
            continue;
        }
        // Skip expressions that reference a derived variable whose own
        // formula failed; that failure is already reported.
        if e.free_vars().iter().any(|n| kinds.get(n) == Some(&None)) {
            continue;
        }
        let lookup = |n: &str| -> Option<Kind> {
            match s.site {
                Site::Plot(v) if n == v => return Some(Kind::Number),
                Site::Effect(raw) if n == "value" => return Some(raw),
                _ => {}
            }
            kinds.get(n).copied().flatten()
        };
        let kind = match infer_kind(e, &lookup) {
            Ok(k) => k,
            Err(err) => {
                let v = Violation::new(ViolationKind::Semantic, s.path.clone(), err.message);
                r.push(match err.span {
                    Some(sp) => v.at_offset(s.offset + sp.start),
                    None => v,
                });
                continue;
            }
        };
        let expected = match s.site {
            Site::Binding | Site::Plot(_) => Some((Kind::Number, "render binding must be numeric")),
            Site::Predicate => Some((Kind::Boolean, "constraint must be boolean")),
            Site::Effect(raw) => Some((
                raw,
                if raw == Kind::Boolean {
                    "toggle mapping must be boolean"
                } else {
                    "transition mapping must be numeric"
                },
            )),
            Site::Template | Site::Derived => None,
        };
        if let Some((want, msg)) = expected {
            if kind != want {
                r.add(ViolationKind::Semantic, s.path.clone(), format!("{msg}, found {kind}"));
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docspec::test_support::pi_interaction;
    use crate::docspec::{Constraint, StateVariable, TransitionRule};

    fn derived(name: &str, formula: &str) -> StateVariable {
        StateVariable {
            name: name.into(),
            control: Control::Derived {
                formula: formula.into(),
            },
        }
    }

    #[test]
    fn pi_spec_is_clean() {
        let r = static_check(&pi_interaction());
        assert!(r.is_empty(), "{r}");
    }

    #[test]
    fn undefined_reference() {
        let mut s = pi_interaction();
        s.state[1] = derived("C", "2*pi*q");
        let r = static_check(&s);
        assert_eq!(r.len(), 1, "{r}");
        assert_eq!(r.violations[0].message, "undefined variable q");
        assert_eq!(r.violations[0].path, "/state/1/formula");
        assert_eq!(r.violations[0].offset, Some(5));
    }

    #[test]
    fn two_cycle() {
        let mut s = pi_interaction();
        s.state.push(derived("a", "b"));
        s.state.push(derived("b", "a"));
        let r = static_check(&s);
        assert!(r.mentions("dependency cycle a → b → a"), "{r}");
    }

    #[test]
    fn derived_transition_target() {
        let mut s = pi_interaction();
        s.transitions.push(TransitionRule {
            control: "C".into(),
            effect: Effect::Direct,
        });
        assert!(static_check(&s).mentions("transition targets derived variable"));
    }

    #[test]
    fn numeric_predicate() {
        let mut s = pi_interaction();
        s.constraint = Some(Constraint {
            predicate: "2*pi*r".into(),
            tolerance: 1e-3,
            description: "x".into(),
        });
        let r = static_check(&s);
        assert!(r.mentions("constraint must be boolean"), "{r}");
    }

    #[test]
    fn parse_errors_are_expression_violations() {
        let mut s = pi_interaction();
        s.state[1] = derived("C", "2πr");
        let r = static_check(&s);
        assert_eq!(r.violations[0].kind, ViolationKind::Expression);
        assert_eq!(r.violations[0].offset, Some(1));
    }

    #[test]
    fn template_offsets_are_field_relative() {
        let mut s = pi_interaction();
        if let RenderPrimitive::Label { text_template, .. } = &mut s.render[1] {
            *text_template = "C = {zz}".into();
        }
        let r = static_check(&s);
        assert_eq!(r.violations[0].path, "/render/1/text_template");
        assert_eq!(r.violations[0].offset, Some(5));
    }

    #[test]
    fn value_outside_mapping() {
        let mut s = pi_interaction();
        s.state[2] = derived("D", "2*value");
        assert!(static_check(&s).mentions("only bound inside transition mappings"));
        let mut s = pi_interaction();
        s.transitions[0].effect = Effect::Map("value/2".into());
        assert!(static_check(&s).is_empty());
        s.transitions[0].effect = Effect::Map("value > 1".into());
        assert!(static_check(&s).mentions("transition mapping must be numeric"));
    }

    #[test]
    fn drag_needs_qualified_names() {
        let mut s = pi_interaction();
        s.state.push(StateVariable {
            name: "p".into(),
            control: Control::Drag {
                x_min: 0.0,
                x_max: 10.0,
                y_min: 0.0,
                y_max: 10.0,
                default: crate::docspec::Point { x: 1.0, y: 1.0 },
            },
        });
        s.state.push(derived("dist", "sqrt(p.x^2 + p.y^2)"));
        assert!(static_check(&s).is_empty());
        s.state.push(derived("bad", "p + 1"));
        assert!(static_check(&s).mentions("must be referenced as p.x or p.y"));
    }

    #[test]
    fn boolean_binding_rejected() {
        let mut s = pi_interaction();
        if let RenderPrimitive::Circle { radius, .. } = &mut s.render[0] {
            *radius = "r > 1".into();
        }
        assert!(static_check(&s).mentions("render binding must be numeric"));
    }
}
