use std::collections::BTreeMap;

use crate::expr::{parse_expr, DerivedNode, Kind};

pub const SPEC_VERSION: &str = "1.0";
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_DECIMALS: u32 = 5;
pub const DEFAULT_PLOT_SAMPLES: u32 = 64;

/// Topic plus an ordered list of knowledge units.
#[derive(Debug, Clone, PartialEq)]
pub struct DocSpec {
    pub spec_version: String,
    pub topic: String,
    pub units: Vec<KnowledgeUnit>,
}

impl DocSpec {
    pub fn unit(&self, id: &str) -> Option<&KnowledgeUnit> {
        self.units.iter().find(|u| u.id == id)
    }

    pub fn unit_index(&self, id: &str) -> Option<usize> {
        self.units.iter().position(|u| u.id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeUnit {
    pub id: String,
    pub summary: String,
    pub text_description: String,
    pub interaction: InteractionSpec,
}

/// State, render, transition and constraint parts of one visualization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionSpec {
    pub state: Vec<StateVariable>,
    pub render: Vec<RenderPrimitive>,
    pub render_note: Option<String>,
    pub transitions: Vec<TransitionRule>,
    pub constraint: Option<Constraint>,
}

impl InteractionSpec {
    /// No transitions means a static visualization: no controls are rendered
    /// and controllable-kind variables stay at their defaults.
    pub fn is_static(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn variable(&self, name: &str) -> Option<&StateVariable> {
        self.state.iter().find(|v| v.name == name)
    }

    /// Variables bound to a user control, in declaration order.
    pub fn controllables(&self) -> impl Iterator<Item = &StateVariable> {
        let live = !self.is_static();
        self.state.iter().filter(move |v| live && v.is_controllable())
    }

    pub fn derived(&self) -> impl Iterator<Item = (&str, &str)> {
        self.state.iter().filter_map(|v| match &v.control {
            Control::Derived { formula } => Some((v.name.as_str(), formula.as_str())),
            _ => None,
        })
    }

    /// Transition effect for `name`; unlisted controllables are direct.
    pub fn effect_for(&self, name: &str) -> &Effect {
        self.transitions
            .iter()
            .find(|t| t.control == name)
            .map(|t| &t.effect)
            .unwrap_or(&Effect::Direct)
    }

    /// Dependency graph of derived variables. Formulas that fail to parse
    /// contribute no edges.
    pub fn derived_nodes(&self) -> Vec<DerivedNode> {
        self.derived()
            .map(|(name, formula)| {
                let refs = parse_expr(formula).map(|e| e.free_vars()).unwrap_or_default();
                DerivedNode {
                    name: name.to_string(),
                    refs,
                }
            })
            .collect()
    }

    /// Kinds of every scalar name controllables introduce (drag expands to
    /// `name.x` and `name.y`). Derived kinds are not included.
    pub fn input_kinds(&self) -> BTreeMap<String, Kind> {
        let mut out = BTreeMap::new();
        for v in &self.state {
            match &v.control {
                Control::Derived { .. } => {}
                Control::Drag { .. } => {
                    out.insert(format!("{}.x", v.name), Kind::Number);
                    out.insert(format!("{}.y", v.name), Kind::Number);
                }
                Control::Toggle { .. } => {
                    out.insert(v.name.clone(), Kind::Boolean);
                }
                _ => {
                    out.insert(v.name.clone(), Kind::Number);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVariable {
    pub name: String,
    pub control: Control,
}

impl StateVariable {
    pub fn is_controllable(&self) -> bool {
        !matches!(self.control, Control::Derived { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        self.control.kind_name()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropdownOption {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    Slider {
        min: f64,
        max: f64,
        step: f64,
        default: f64,
    },
    Dropdown {
        options: Vec<DropdownOption>,
        default: usize,
    },
    Toggle {
        default: bool,
    },
    Drag {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        default: Point,
    },
    Derived {
        formula: String,
    },
}

impl Control {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Control::Slider { .. } => "slider",
            Control::Dropdown { .. } => "dropdown",
            Control::Toggle { .. } => "toggle",
            Control::Drag { .. } => "drag",
            Control::Derived { .. } => "derived",
        }
    }
}

/// A render attribute: a number or an expression over state variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Binding {
    Literal(f64),
    Expr(String),
}

impl Binding {
    pub fn expr(src: impl Into<String>) -> Self {
        Binding::Expr(src.into())
    }
}

impl From<f64> for Binding {
    fn from(v: f64) -> Self {
        Binding::Literal(v)
    }
}

impl From<&str> for Binding {
    fn from(s: &str) -> Self {
        Binding::Expr(s.to_string())
    }
}

/// Drawing primitive in the abstract `[0,10] x [0,10]` unit space, y up.
#[derive(Debug, Clone, PartialEq)]
pub enum RenderPrimitive {
    Circle {
        center_x: Binding,
        center_y: Binding,
        radius: Binding,
        color: Option<String>,
    },
    Rect {
        x: Binding,
        y: Binding,
        width: Binding,
        height: Binding,
        color: Option<String>,
    },
    Line {
        x1: Binding,
        y1: Binding,
        x2: Binding,
        y2: Binding,
        color: Option<String>,
    },
    Polyline {
        points: Vec<(Binding, Binding)>,
        color: Option<String>,
    },
    Label {
        x: Binding,
        y: Binding,
        text_template: String,
        decimals: Option<u32>,
        color: Option<String>,
    },
    Plot {
        variable: String,
        expr: String,
        from: Binding,
        to: Binding,
        samples: Option<u32>,
        color: Option<String>,
    },
}

impl RenderPrimitive {
    pub fn kind_name(&self) -> &'static str {
        match self {
            RenderPrimitive::Circle { .. } => "circle",
            RenderPrimitive::Rect { .. } => "rect",
            RenderPrimitive::Line { .. } => "line",
            RenderPrimitive::Polyline { .. } => "polyline",
            RenderPrimitive::Label { .. } => "label",
            RenderPrimitive::Plot { .. } => "plot",
        }
    }

    pub fn color(&self) -> Option<&str> {
        match self {
            RenderPrimitive::Circle { color, .. }
            | RenderPrimitive::Rect { color, .. }
            | RenderPrimitive::Line { color, .. }
            | RenderPrimitive::Polyline { color, .. }
            | RenderPrimitive::Label { color, .. }
            | RenderPrimitive::Plot { color, .. } => color.as_deref(),
        }
    }

    /// Named scalar bindings with their JSON-pointer suffix.
    pub fn bindings(&self) -> Vec<(String, &Binding)> {
        match self {
            RenderPrimitive::Circle {
                center_x,
                center_y,
                radius,
                ..
            } => vec![
                ("center_x".into(), center_x),
                ("center_y".into(), center_y),
                ("radius".into(), radius),
            ],
            RenderPrimitive::Rect {
                x, y, width, height, ..
            } => vec![
                ("x".into(), x),
                ("y".into(), y),
                ("width".into(), width),
                ("height".into(), height),
            ],
            RenderPrimitive::Line { x1, y1, x2, y2, .. } => vec![
                ("x1".into(), x1),
                ("y1".into(), y1),
                ("x2".into(), x2),
                ("y2".into(), y2),
            ],
            RenderPrimitive::Polyline { points, .. } => points
                .iter()
                .enumerate()
                .flat_map(|(i, (x, y))| [(format!("points/{i}/0"), x), (format!("points/{i}/1"), y)])
                .collect(),
            RenderPrimitive::Label { x, y, .. } => vec![("x".into(), x), ("y".into(), y)],
            RenderPrimitive::Plot { from, to, .. } => vec![("from".into(), from), ("to".into(), to)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRule {
    pub control: String,
    pub effect: Effect,
}

/// How a raw control value reaches its state variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Direct,
    /// Expression over the raw control value, bound as `value`.
    Map(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub predicate: String,
    pub tolerance: f64,
    pub description: String,
}

/// One piece of a label template: literal text or an embedded expression.
#[derive(Debug, Clone, PartialEq)]
pub enum TemplatePart {
    Text(String),
    Expr { source: String, offset: usize },
}

/// Splits `"C = {C}"` into text and expression parts. `{{` and `}}` escape braces.
pub fn parse_template(template: &str) -> Result<Vec<TemplatePart>, String> {
    let mut parts = Vec::new();
    let mut text = String::new();
    let mut chars = template.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            '{' if chars.peek().map(|p| p.1) == Some('{') => {
                chars.next();
                text.push('{');
            }
            '}' if chars.peek().map(|p| p.1) == Some('}') => {
                chars.next();
                text.push('}');
            }
            '{' => {
                let start = i + 1;
                let mut end = None;
                for (j, d) in chars.by_ref() {
                    if d == '}' {
                        end = Some(j);
                        break;
                    }
                    if d == '{' {
                        return Err(format!("nested '{{' at byte {j}"));
                    }
                }
                let end = end.ok_or_else(|| format!("unclosed '{{' at byte {i}"))?;
                if !text.is_empty() {
                    parts.push(TemplatePart::Text(std::mem::take(&mut text)));
                }
                parts.push(TemplatePart::Expr {
                    source: template[start..end].to_string(),
                    offset: start,
                });
            }
            '}' => return Err(format!("unmatched '}}' at byte {i}")),
            _ => text.push(c),
        }
    }
    if !text.is_empty() {
        parts.push(TemplatePart::Text(text));
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_parts() {
        let parts = parse_template("C = {C}, D = {2*r} {{x}}").unwrap();
        assert_eq!(
            parts,
            vec![
                TemplatePart::Text("C = ".into()),
                TemplatePart::Expr {
                    source: "C".into(),
                    offset: 5
                },
                TemplatePart::Text(", D = ".into()),
                TemplatePart::Expr {
                    source: "2*r".into(),
                    offset: 14
                },
                TemplatePart::Text(" {x}".into()),
            ]
        );
        assert!(parse_template("a {b").is_err());
        assert!(parse_template("a } b").is_err());
    }
}
