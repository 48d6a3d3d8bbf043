use std::collections::HashSet;

use super::model::*;
use crate::expr::{is_identifier, is_reserved};
use crate::report::{ValidationReport, ViolationKind};
use crate::verify::static_check;

/// All docspec invariants plus the expression-level static checks of every unit.
pub fn validate_docspec(spec: &DocSpec) -> ValidationReport {
    let mut r = ValidationReport::new();
    if !is_supported_version(&spec.spec_version) {
        r.add(
            ViolationKind::Semantic,
            "/spec_version",
            format!(
                "unsupported spec_version '{}' (this build reads {SPEC_VERSION})",
                spec.spec_version
            ),
        );
    }
    if spec.topic.trim().is_empty() {
        r.add(ViolationKind::Semantic, "/topic", "topic must not be empty");
    }
    if spec.units.is_empty() {
        r.add(
            ViolationKind::Schema,
            "/units",
            "units must contain at least one knowledge unit",
        );
    }
    let mut seen = HashSet::new();
    for (i, u) in spec.units.iter().enumerate() {
        let base = format!("/units/{i}");
        if !is_unit_id(&u.id) {
            r.add(
                ViolationKind::Semantic,
                format!("{base}/id"),
                format!(
                    "unit id '{}' must be non-empty and use only letters, digits, '-', '_' or '.'",
                    u.id
                ),
            );
        } else if !seen.insert(u.id.as_str()) {
            r.add(
                ViolationKind::Semantic,
                format!("{base}/id"),
                format!("duplicate unit id '{}'", u.id),
            );
        }
        if u.summary.trim().is_empty() {
            r.add(ViolationKind::Semantic, format!("{base}/summary"), "summary must not be empty");
        }
        if u.text_description.trim().is_empty() {
            r.add(
                ViolationKind::Semantic,
                format!("{base}/text_description"),
                "text_description must not be empty",
            );
        }
        r.extend_prefixed(&format!("{base}/interaction"), static_check(&u.interaction));
    }
    r
}

pub fn is_supported_version(v: &str) -> bool {
    let parts: Vec<&str> = v.split('.').collect();
    match parts.as_slice() {
        ["1", "0"] => true,
        ["1", "0", patch] => !patch.is_empty() && patch.chars().all(|c| c.is_ascii_digit()),
        _ => false,
    }
}

pub fn is_unit_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Structural invariants of one interaction spec: names, domains, colors,
/// transition targets, constraint shape. Paths are relative to the spec.
pub fn check_interaction_structure(spec: &InteractionSpec) -> ValidationReport {
    let mut r = ValidationReport::new();
    let sem = ViolationKind::Semantic;
    let mut names = HashSet::new();
    for (i, v) in spec.state.iter().enumerate() {
        let base = format!("/state/{i}");
        if !is_identifier(&v.name) {
            r.add(
                sem,
                format!("{base}/name"),
                format!(
                    "variable name '{}' must be a letter followed by letters, digits or '_'",
                    v.name
                ),
            );
        } else if is_reserved(&v.name) {
            r.add(
                sem,
                format!("{base}/name"),
                format!("variable name '{}' is reserved", v.name),
            );
        } else if !names.insert(v.name.as_str()) {
            r.add(
                sem,
                format!("{base}/name"),
                format!("duplicate variable name '{}'", v.name),
            );
        }
        check_control(&mut r, &base, &v.control);
    }

    for (i, p) in spec.render.iter().enumerate() {
        let base = format!("/render/{i}");
        if let Some(c) = p.color() {
            if !super::colors::is_css_color(c) {
                let msg = if spec.state.iter().any(|v| c.contains(v.name.as_str())) && c.len() < 64 {
                    format!("color '{c}' must be a literal CSS color, not an expression")
                } else {
                    format!("color '{c}' is not a CSS color literal")
                };
                r.add(sem, format!("{base}/color"), msg);
            }
        }
        match p {
            RenderPrimitive::Label { decimals: Some(d), .. } if *d > 20 => {
                r.add(sem, format!("{base}/decimals"), "decimals must be between 0 and 20");
            }
            RenderPrimitive::Plot {
                variable, samples, ..
            } => {
                if !is_identifier(variable) || is_reserved(variable) {
                    r.add(
                        sem,
                        format!("{base}/variable"),
                        format!("plot variable '{variable}' is not a valid identifier"),
                    );
                } else if spec.variable(variable).is_some() {
                    r.add(
                        sem,
                        format!("{base}/variable"),
                        format!("plot variable '{variable}' shadows a state variable"),
                    );
                }
                if let Some(s) = samples {
                    if !(2..=1000).contains(s) {
                        r.add(sem, format!("{base}/samples"), "samples must be between 2 and 1000");
                    }
                }
            }
            RenderPrimitive::Polyline { points, .. } if points.len() < 2 => {
                r.add(sem, format!("{base}/points"), "polyline needs at least 2 points");
            }
            _ => {}
        }
    }

    let mut ruled = HashSet::new();
    for (i, t) in spec.transitions.iter().enumerate() {
        let base = format!("/transitions/{i}");
        match spec.variable(&t.control) {
            None => r.add(
                sem,
                format!("{base}/control"),
                format!("transition control '{}' is not a declared variable", t.control),
            ),
            Some(v) if !v.is_controllable() => r.add(
                sem,
                format!("{base}/control"),
                format!("transition targets derived variable {}", t.control),
            ),
            Some(v) => {
                if !ruled.insert(t.control.as_str()) {
                    r.add(
                        sem,
                        format!("{base}/control"),
                        format!("duplicate transition for variable {}", t.control),
                    );
                }
                if matches!(v.control, Control::Drag { .. }) && matches!(t.effect, Effect::Map(_)) {
                    r.add(
                        sem,
                        format!("{base}/effect"),
                        "drag controls only support the direct effect",
                    );
                }
            }
        }
    }

    match &spec.constraint {
        None if !spec.transitions.is_empty() => r.add(
            sem,
            "/constraint",
            "interactive specs (non-empty transitions) require a constraint",
        ),
        Some(c) => {
            if !(c.tolerance.is_finite() && c.tolerance > 0.0) {
                r.add(sem, "/constraint/tolerance", "tolerance must be a positive number");
            }
            if c.description.trim().is_empty() {
                r.add(
                    sem,
                    "/constraint/description",
                    "constraint description must not be empty",
                );
            }
        }
        None => {}
    }
    r
}

fn check_control(r: &mut ValidationReport, base: &str, control: &Control) {
    let sem = ViolationKind::Semantic;
    let finite = |r: &mut ValidationReport, field: &str, v: f64| -> bool {
        if v.is_finite() {
            true
        } else {
            r.add(sem, format!("{base}/{field}"), format!("{field} must be finite"));
            false
        }
    };
    match control {
        Control::Slider {
            min,
            max,
            step,
            default,
        } => {
            let ok = finite(r, "min", *min) & finite(r, "max", *max) & finite(r, "step", *step)
                & finite(r, "default", *default);
            if !ok {
                return;
            }
            if min >= max {
                r.add(sem, format!("{base}/min"), "min < max violated");
            } else {
                if default < min || default > max {
                    r.add(
                        sem,
                        format!("{base}/default"),
                        format!("default {default} outside [{min}, {max}]"),
                    );
                }
                if *step > max - min {
                    r.add(sem, format!("{base}/step"), "step exceeds the slider range");
                }
            }
            if *step <= 0.0 {
                r.add(sem, format!("{base}/step"), "step must be positive");
            }
        }
        Control::Dropdown { options, default } => {
            if options.len() < 2 {
                r.add(sem, format!("{base}/options"), "dropdown needs at least 2 options");
            }
            if *default >= options.len() {
                r.add(
                    sem,
                    format!("{base}/default"),
                    format!("default index {default} out of range for {} options", options.len()),
                );
            }
            for (i, o) in options.iter().enumerate() {
                if o.label.trim().is_empty() {
                    r.add(sem, format!("{base}/options/{i}/label"), "option label must not be empty");
                }
                if !o.value.is_finite() {
                    r.add(sem, format!("{base}/options/{i}/value"), "option value must be finite");
                }
            }
        }
        Control::Toggle { .. } => {}
        Control::Drag {
            x_min,
            x_max,
            y_min,
            y_max,
            default,
        } => {
            let ok = finite(r, "x_min", *x_min)
                & finite(r, "x_max", *x_max)
                & finite(r, "y_min", *y_min)
                & finite(r, "y_max", *y_max)
                & finite(r, "default/x", default.x)
                & finite(r, "default/y", default.y);
            if !ok {
                return;
            }
            let mut domain_ok = true;
            if x_min >= x_max {
                r.add(sem, format!("{base}/x_min"), "x_min < x_max violated");
                domain_ok = false;
            }
            if y_min >= y_max {
                r.add(sem, format!("{base}/y_min"), "y_min < y_max violated");
                domain_ok = false;
            }
            if domain_ok
                && (default.x < *x_min || default.x > *x_max || default.y < *y_min || default.y > *y_max)
            {
                r.add(sem, format!("{base}/default"), "default point outside the drag domain");
            }
        }
        Control::Derived { formula } => {
            if formula.trim().is_empty() {
                r.add(sem, format!("{base}/formula"), "formula must not be empty");
            }
        }
    }
}
