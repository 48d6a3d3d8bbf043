//! Canonical `.docspec.json` encoding.
//!
//! Keys are written in a fixed schema order, integral numbers without a
//! fractional part and every other number in shortest round-trip form, so the
//! same DocSpec always serializes to the same bytes.

use serde_json::{Map, Value as Json};

use super::model::*;
use super::validate::validate_docspec;
use crate::report::{pointer_token, ValidationReport, ViolationKind};

/// JSON number in canonical form: `1` rather than `1.0`.
pub fn canonical_number(v: f64) -> Json {
    const EXACT: f64 = 9_007_199_254_740_992.0; // 2^53
    if v.fract() == 0.0 && v.abs() < EXACT && !(v == 0.0 && v.is_sign_negative()) {
        Json::from(v as i64)
    } else {
        serde_json::Number::from_f64(v).map_or(Json::Null, Json::Number)
    }
}

fn binding_json(b: &Binding) -> Json {
    match b {
        Binding::Literal(v) => canonical_number(*v),
        Binding::Expr(s) => Json::String(s.clone()),
    }
}

fn put(m: &mut Map<String, Json>, k: &str, v: Json) {
    m.insert(k.to_string(), v);
}

fn put_color(m: &mut Map<String, Json>, color: &Option<String>) {
    if let Some(c) = color {
        put(m, "color", Json::String(c.clone()));
    }
}

fn variable_json(v: &StateVariable) -> Json {
    let mut m = Map::new();
    put(&mut m, "name", Json::String(v.name.clone()));
    put(&mut m, "kind", Json::String(v.kind_name().into()));
    match &v.control {
        Control::Slider {
            min,
            max,
            step,
            default,
        } => {
            put(&mut m, "min", canonical_number(*min));
            put(&mut m, "max", canonical_number(*max));
            put(&mut m, "step", canonical_number(*step));
            put(&mut m, "default", canonical_number(*default));
        }
        Control::Dropdown { options, default } => {
            let opts = options
                .iter()
                .map(|o| {
                    let mut om = Map::new();
                    put(&mut om, "label", Json::String(o.label.clone()));
                    put(&mut om, "value", canonical_number(o.value));
                    Json::Object(om)
                })
                .collect();
            put(&mut m, "options", Json::Array(opts));
            put(&mut m, "default", Json::from(*default as u64));
        }
        Control::Toggle { default } => put(&mut m, "default", Json::Bool(*default)),
        Control::Drag {
            x_min,
            x_max,
            y_min,
            y_max,
            default,
        } => {
            put(&mut m, "x_min", canonical_number(*x_min));
            put(&mut m, "x_max", canonical_number(*x_max));
            put(&mut m, "y_min", canonical_number(*y_min));
            put(&mut m, "y_max", canonical_number(*y_max));
            let mut d = Map::new();
            put(&mut d, "x", canonical_number(default.x));
            put(&mut d, "y", canonical_number(default.y));
            put(&mut m, "default", Json::Object(d));
        }
        Control::Derived { formula } => put(&mut m, "formula", Json::String(formula.clone())),
    }
    Json::Object(m)
}

fn primitive_json(p: &RenderPrimitive) -> Json {
    let mut m = Map::new();
    put(&mut m, "kind", Json::String(p.kind_name().into()));
    match p {
        RenderPrimitive::Circle {
            center_x,
            center_y,
            radius,
            color,
        } => {
            put(&mut m, "center_x", binding_json(center_x));
            put(&mut m, "center_y", binding_json(center_y));
            put(&mut m, "radius", binding_json(radius));
            put_color(&mut m, color);
        }
        RenderPrimitive::Rect {
            x,
            y,
            width,
            height,
            color,
        } => {
            put(&mut m, "x", binding_json(x));
            put(&mut m, "y", binding_json(y));
            put(&mut m, "width", binding_json(width));
            put(&mut m, "height", binding_json(height));
            put_color(&mut m, color);
        }
        RenderPrimitive::Line {
            x1,
            y1,
            x2,
            y2,
            color,
        } => {
            put(&mut m, "x1", binding_json(x1));
            put(&mut m, "y1", binding_json(y1));
            put(&mut m, "x2", binding_json(x2));
            put(&mut m, "y2", binding_json(y2));
            put_color(&mut m, color);
        }
        RenderPrimitive::Polyline { points, color } => {
            let pts = points
                .iter()
                .map(|(x, y)| Json::Array(vec![binding_json(x), binding_json(y)]))
                .collect();
            put(&mut m, "points", Json::Array(pts));
            put_color(&mut m, color);
        }
        RenderPrimitive::Label {
            x,
            y,
            text_template,
            decimals,
            color,
        } => {
            put(&mut m, "x", binding_json(x));
            put(&mut m, "y", binding_json(y));
            put(&mut m, "text_template", Json::String(text_template.clone()));
            if let Some(d) = decimals {
                put(&mut m, "decimals", Json::from(*d));
            }
            put_color(&mut m, color);
        }
        RenderPrimitive::Plot {
            variable,
            expr,
            from,
            to,
            samples,
            color,
        } => {
            put(&mut m, "variable", Json::String(variable.clone()));
            put(&mut m, "expr", Json::String(expr.clone()));
            put(&mut m, "from", binding_json(from));
            put(&mut m, "to", binding_json(to));
            if let Some(s) = samples {
                put(&mut m, "samples", Json::from(*s));
            }
            put_color(&mut m, color);
        }
    }
    Json::Object(m)
}

pub fn interaction_to_json(spec: &InteractionSpec) -> Json {
    let mut m = Map::new();
    put(
        &mut m,
        "state",
        Json::Array(spec.state.iter().map(variable_json).collect()),
    );
    put(
        &mut m,
        "render",
        Json::Array(spec.render.iter().map(primitive_json).collect()),
    );
    if let Some(note) = &spec.render_note {
        put(&mut m, "render_note", Json::String(note.clone()));
    }
    let transitions = spec
        .transitions
        .iter()
        .map(|t| {
            let mut tm = Map::new();
            put(&mut tm, "control", Json::String(t.control.clone()));
            let effect = match &t.effect {
                Effect::Direct => Json::String("direct".into()),
                Effect::Map(src) => {
                    let mut em = Map::new();
                    put(&mut em, "map", Json::String(src.clone()));
                    Json::Object(em)
                }
            };
            put(&mut tm, "effect", effect);
            Json::Object(tm)
        })
        .collect();
    put(&mut m, "transitions", Json::Array(transitions));
    if let Some(c) = &spec.constraint {
        let mut cm = Map::new();
        put(&mut cm, "predicate", Json::String(c.predicate.clone()));
        put(&mut cm, "tolerance", canonical_number(c.tolerance));
        put(&mut cm, "description", Json::String(c.description.clone()));
        put(&mut m, "constraint", Json::Object(cm));
    }
    Json::Object(m)
}

pub fn unit_to_json(u: &KnowledgeUnit) -> Json {
    let mut m = Map::new();
    put(&mut m, "id", Json::String(u.id.clone()));
    put(&mut m, "summary", Json::String(u.summary.clone()));
    put(&mut m, "text_description", Json::String(u.text_description.clone()));
    put(&mut m, "interaction", interaction_to_json(&u.interaction));
    Json::Object(m)
}

pub fn docspec_to_json(spec: &DocSpec) -> Json {
    let mut m = Map::new();
    put(&mut m, "spec_version", Json::String(spec.spec_version.clone()));
    put(&mut m, "topic", Json::String(spec.topic.clone()));
    put(
        &mut m,
        "units",
        Json::Array(spec.units.iter().map(unit_to_json).collect()),
    );
    Json::Object(m)
}

/// Canonical text: two-space indented JSON with a trailing newline.
pub fn serialize_docspec(spec: &DocSpec) -> String {
    let mut s = serde_json::to_string_pretty(&docspec_to_json(spec)).expect("json values always serialize");
    s.push('\n');
    s
}

/// Parses and fully validates a canonical document.
pub fn parse_docspec(source: &str) -> Result<DocSpec, ValidationReport> {
    let json: Json = serde_json::from_str(source).map_err(|e| {
        let mut r = ValidationReport::new();
        r.add(
            ViolationKind::Syntax,
            "",
            format!("malformed document at line {} column {}: {e}", e.line(), e.column()),
        );
        r
    })?;
    let spec = docspec_from_json(&json)?;
    let report = validate_docspec(&spec);
    if report.is_empty() {
        Ok(spec)
    } else {
        Err(report)
    }
}

/// Decodes structure only; semantic invariants are left to the validators.
pub fn docspec_from_json(json: &Json) -> Result<DocSpec, ValidationReport> {
    let mut d = Decoder::default();
    let spec = d.docspec(json);
    match spec {
        Some(s) if d.report.is_empty() => Ok(s),
        _ => Err(d.report),
    }
}

pub fn interaction_from_json(json: &Json) -> Result<InteractionSpec, ValidationReport> {
    let mut d = Decoder::default();
    let spec = d.interaction(json, "");
    match spec {
        Some(s) if d.report.is_empty() => Ok(s),
        _ => Err(d.report),
    }
}

pub fn unit_from_json(json: &Json) -> Result<KnowledgeUnit, ValidationReport> {
    let mut d = Decoder::default();
    let unit = d.unit(json, "");
    match unit {
        Some(u) if d.report.is_empty() => Ok(u),
        _ => Err(d.report),
    }
}

fn type_name(v: &Json) -> &'static str {
    match v {
        Json::Null => "null",
        Json::Bool(_) => "boolean",
        Json::Number(_) => "number",
        Json::String(_) => "string",
        Json::Array(_) => "array",
        Json::Object(_) => "object",
    }
}

#[derive(Default)]
struct Decoder {
    report: ValidationReport,
}

impl Decoder {
    fn schema(&mut self, path: &str, msg: impl Into<String>) {
        self.report.add(ViolationKind::Schema, path, msg);
    }

    fn object<'a>(&mut self, v: &'a Json, path: &str) -> Option<&'a Map<String, Json>> {
        match v {
            Json::Object(m) => Some(m),
            other => {
                self.schema(path, format!("expected object, found {}", type_name(other)));
                None
            }
        }
    }

    fn only(&mut self, m: &Map<String, Json>, path: &str, allowed: &[&str]) {
        for k in m.keys() {
            if !allowed.contains(&k.as_str()) {
                self.schema(
                    &format!("{path}/{}", pointer_token(k)),
                    format!("unknown field '{k}'"),
                );
            }
        }
    }

    fn field<'a>(&mut self, m: &'a Map<String, Json>, path: &str, key: &str) -> Option<&'a Json> {
        let v = m.get(key);
        if v.is_none() {
            self.schema(&format!("{path}/{key}"), format!("missing field '{key}'"));
        }
        v
    }

    fn string(&mut self, m: &Map<String, Json>, path: &str, key: &str) -> Option<String> {
        let v = self.field(m, path, key)?;
        self.as_string(v, &format!("{path}/{key}"))
    }

    fn as_string(&mut self, v: &Json, path: &str) -> Option<String> {
        match v {
            Json::String(s) => Some(s.clone()),
            other => {
                self.schema(path, format!("expected string, found {}", type_name(other)));
                None
            }
        }
    }

    fn opt_string(&mut self, m: &Map<String, Json>, path: &str, key: &str) -> Option<Option<String>> {
        match m.get(key) {
            None => Some(None),
            Some(v) => self.as_string(v, &format!("{path}/{key}")).map(Some),
        }
    }

    fn number(&mut self, m: &Map<String, Json>, path: &str, key: &str) -> Option<f64> {
        let v = self.field(m, path, key)?;
        self.as_number(v, &format!("{path}/{key}"))
    }

    fn as_number(&mut self, v: &Json, path: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) => Some(x),
            None => {
                self.schema(path, format!("expected number, found {}", type_name(v)));
                None
            }
        }
    }

    fn uint(&mut self, v: &Json, path: &str) -> Option<u64> {
        match v.as_u64() {
            Some(x) => Some(x),
            None => {
                self.schema(path, format!("expected non-negative integer, found {v}"));
                None
            }
        }
    }

    fn array<'a>(&mut self, m: &'a Map<String, Json>, path: &str, key: &str) -> Option<&'a Vec<Json>> {
        match self.field(m, path, key)? {
            Json::Array(a) => Some(a),
            other => {
                self.schema(
                    &format!("{path}/{key}"),
                    format!("expected array, found {}", type_name(other)),
                );
                None
            }
        }
    }

    fn binding(&mut self, m: &Map<String, Json>, path: &str, key: &str) -> Option<Binding> {
        let v = self.field(m, path, key)?;
        self.as_binding(v, &format!("{path}/{key}"))
    }

    fn as_binding(&mut self, v: &Json, path: &str) -> Option<Binding> {
        match v {
            Json::Number(n) => n.as_f64().map(Binding::Literal),
            Json::String(s) => Some(Binding::Expr(s.clone())),
            other => {
                self.schema(
                    path,
                    format!("expected number or expression string, found {}", type_name(other)),
                );
                None
            }
        }
    }

    fn docspec(&mut self, v: &Json) -> Option<DocSpec> {
        let m = self.object(v, "")?;
        self.only(m, "", &["spec_version", "topic", "units"]);
        let spec_version = self.string(m, "", "spec_version");
        let topic = self.string(m, "", "topic");
        let units = self.array(m, "", "units").map(|arr| {
            if arr.is_empty() {
                self.schema("/units", "units must contain at least one knowledge unit");
            }
            arr.iter()
                .enumerate()
                .filter_map(|(i, u)| self.unit(u, &format!("/units/{i}")))
                .collect::<Vec<_>>()
        });
        Some(DocSpec {
            spec_version: spec_version?,
            topic: topic?,
            units: units?,
        })
    }

    fn unit(&mut self, v: &Json, path: &str) -> Option<KnowledgeUnit> {
        let m = self.object(v, path)?;
        self.only(m, path, &["id", "summary", "text_description", "interaction"]);
        let id = self.string(m, path, "id");
        let summary = self.string(m, path, "summary");
        let text_description = self.string(m, path, "text_description");
        let interaction = self
            .field(m, path, "interaction")
            .and_then(|iv| self.interaction(iv, &format!("{path}/interaction")));
        Some(KnowledgeUnit {
            id: id?,
            summary: summary?,
            text_description: text_description?,
            interaction: interaction?,
        })
    }

    fn interaction(&mut self, v: &Json, path: &str) -> Option<InteractionSpec> {
        let m = self.object(v, path)?;
        self.only(
            m,
            path,
            &["state", "render", "render_note", "transitions", "constraint"],
        );
        let state = self.array(m, path, "state").map(|arr| {
            arr.iter()
                .enumerate()
                .map(|(i, s)| self.variable(s, &format!("{path}/state/{i}")))
                .collect::<Vec<_>>()
        });
        let render = self.array(m, path, "render").map(|arr| {
            arr.iter()
                .enumerate()
                .map(|(i, p)| self.primitive(p, &format!("{path}/render/{i}")))
                .collect::<Vec<_>>()
        });
        let render_note = self.opt_string(m, path, "render_note");
        let transitions = self.array(m, path, "transitions").map(|arr| {
            arr.iter()
                .enumerate()
                .map(|(i, t)| self.transition(t, &format!("{path}/transitions/{i}")))
                .collect::<Vec<_>>()
        });
        let constraint = match m.get("constraint") {
            None | Some(Json::Null) => Some(None),
            Some(c) => self.constraint(c, &format!("{path}/constraint")).map(Some),
        };
        Some(InteractionSpec {
            state: state?.into_iter().collect::<Option<Vec<_>>>()?,
            render: render?.into_iter().collect::<Option<Vec<_>>>()?,
            render_note: render_note?,
            transitions: transitions?.into_iter().collect::<Option<Vec<_>>>()?,
            constraint: constraint?,
        })
    }

    fn variable(&mut self, v: &Json, path: &str) -> Option<StateVariable> {
        let m = self.object(v, path)?;
        let name = self.string(m, path, "name");
        let kind = self.string(m, path, "kind")?;
        let control = match kind.as_str() {
            "slider" => {
                self.only(m, path, &["name", "kind", "min", "max", "step", "default"]);
                let min = self.number(m, path, "min");
                let max = self.number(m, path, "max");
                let step = self.number(m, path, "step");
                let default = self.number(m, path, "default");
                Control::Slider {
                    min: min?,
                    max: max?,
                    step: step?,
                    default: default?,
                }
            }
            "dropdown" => {
                self.only(m, path, &["name", "kind", "options", "default"]);
                let options = self.array(m, path, "options").map(|arr| {
                    arr.iter()
                        .enumerate()
                        .map(|(i, o)| {
                            let p = format!("{path}/options/{i}");
                            let om = self.object(o, &p)?;
                            self.only(om, &p, &["label", "value"]);
                            let label = self.string(om, &p, "label");
                            let value = self.number(om, &p, "value");
                            Some(DropdownOption {
                                label: label?,
                                value: value?,
                            })
                        })
                        .collect::<Vec<_>>()
                });
                let default = self
                    .field(m, path, "default")
                    .and_then(|d| self.uint(d, &format!("{path}/default")));
                Control::Dropdown {
                    options: options?.into_iter().collect::<Option<Vec<_>>>()?,
                    default: default? as usize,
                }
            }
            "toggle" => {
                self.only(m, path, &["name", "kind", "default"]);
                let default = match self.field(m, path, "default")? {
                    Json::Bool(b) => *b,
                    other => {
                        self.schema(
                            &format!("{path}/default"),
                            format!("expected boolean, found {}", type_name(other)),
                        );
                        return None;
                    }
                };
                Control::Toggle { default }
            }
            "drag" => {
                self.only(
                    m,
                    path,
                    &["name", "kind", "x_min", "x_max", "y_min", "y_max", "default"],
                );
                let x_min = self.number(m, path, "x_min");
                let x_max = self.number(m, path, "x_max");
                let y_min = self.number(m, path, "y_min");
                let y_max = self.number(m, path, "y_max");
                let default = self.field(m, path, "default").and_then(|d| {
                    let p = format!("{path}/default");
                    let dm = self.object(d, &p)?;
                    self.only(dm, &p, &["x", "y"]);
                    let x = self.number(dm, &p, "x");
                    let y = self.number(dm, &p, "y");
                    Some(Point { x: x?, y: y? })
                });
                Control::Drag {
                    x_min: x_min?,
                    x_max: x_max?,
                    y_min: y_min?,
                    y_max: y_max?,
                    default: default?,
                }
            }
            "derived" => {
                self.only(m, path, &["name", "kind", "formula"]);
                Control::Derived {
                    formula: self.string(m, path, "formula")?,
                }
            }
            other => {
                self.schema(
                    &format!("{path}/kind"),
                    format!(
                        "unknown variable kind '{other}' (expected slider, dropdown, toggle, drag or derived)"
                    ),
                );
                return None;
            }
        };
        Some(StateVariable {
            name: name?,
            control,
        })
    }

    fn primitive(&mut self, v: &Json, path: &str) -> Option<RenderPrimitive> {
        let m = self.object(v, path)?;
        let kind = self.string(m, path, "kind")?;
        let color = self.opt_string(m, path, "color");
        let prim = match kind.as_str() {
            "circle" => {
                self.only(m, path, &["kind", "center_x", "center_y", "radius", "color"]);
                let cx = self.binding(m, path, "center_x");
                let cy = self.binding(m, path, "center_y");
                let r = self.binding(m, path, "radius");
                RenderPrimitive::Circle {
                    center_x: cx?,
                    center_y: cy?,
                    radius: r?,
                    color: color?,
                }
            }
            "rect" => {
                self.only(m, path, &["kind", "x", "y", "width", "height", "color"]);
                let x = self.binding(m, path, "x");
                let y = self.binding(m, path, "y");
                let w = self.binding(m, path, "width");
                let h = self.binding(m, path, "height");
                RenderPrimitive::Rect {
                    x: x?,
                    y: y?,
                    width: w?,
                    height: h?,
                    color: color?,
                }
            }
            "line" => {
                self.only(m, path, &["kind", "x1", "y1", "x2", "y2", "color"]);
                let x1 = self.binding(m, path, "x1");
                let y1 = self.binding(m, path, "y1");
                let x2 = self.binding(m, path, "x2");
                let y2 = self.binding(m, path, "y2");
                RenderPrimitive::Line {
                    x1: x1?,
                    y1: y1?,
                    x2: x2?,
                    y2: y2?,
                    color: color?,
                }
            }
            "polyline" => {
                self.only(m, path, &["kind", "points", "color"]);
                let points = self.array(m, path, "points").map(|arr| {
                    arr.iter()
                        .enumerate()
                        .map(|(i, p)| {
                            let pp = format!("{path}/points/{i}");
                            match p {
                                Json::Array(xy) if xy.len() == 2 => {
                                    let x = self.as_binding(&xy[0], &format!("{pp}/0"));
                                    let y = self.as_binding(&xy[1], &format!("{pp}/1"));
                                    Some((x?, y?))
                                }
                                _ => {
                                    self.schema(&pp, "expected [x, y] pair");
                                    None
                                }
                            }
                        })
                        .collect::<Vec<_>>()
                });
                RenderPrimitive::Polyline {
                    points: points?.into_iter().collect::<Option<Vec<_>>>()?,
                    color: color?,
                }
            }
            "label" => {
                self.only(m, path, &["kind", "x", "y", "text_template", "decimals", "color"]);
                let x = self.binding(m, path, "x");
                let y = self.binding(m, path, "y");
                let text = self.string(m, path, "text_template");
                let decimals = match m.get("decimals") {
                    None => Some(None),
                    Some(d) => self.uint(d, &format!("{path}/decimals")).map(|d| Some(d as u32)),
                };
                RenderPrimitive::Label {
                    x: x?,
                    y: y?,
                    text_template: text?,
                    decimals: decimals?,
                    color: color?,
                }
            }
            "plot" => {
                self.only(
                    m,
                    path,
                    &["kind", "variable", "expr", "from", "to", "samples", "color"],
                );
                let variable = self.string(m, path, "variable");
                let expr = self.string(m, path, "expr");
                let from = self.binding(m, path, "from");
                let to = self.binding(m, path, "to");
                let samples = match m.get("samples") {
                    None => Some(None),
                    Some(s) => self.uint(s, &format!("{path}/samples")).map(|s| Some(s as u32)),
                };
                RenderPrimitive::Plot {
                    variable: variable?,
                    expr: expr?,
                    from: from?,
                    to: to?,
                    samples: samples?,
                    color: color?,
                }
            }
            other => {
                self.schema(
                    &format!("{path}/kind"),
                    format!(
                        "unsupported primitive kind '{other}' (expected circle, rect, line, polyline, label or plot)"
                    ),
                );
                return None;
            }
        };
        Some(prim)
    }

    fn transition(&mut self, v: &Json, path: &str) -> Option<TransitionRule> {
        let m = self.object(v, path)?;
        self.only(m, path, &["control", "effect"]);
        let control = self.string(m, path, "control");
        let effect = match self.field(m, path, "effect") {
            Some(Json::String(s)) if s == "direct" => Some(Effect::Direct),
            Some(Json::Object(em)) => {
                let p = format!("{path}/effect");
                self.only(em, &p, &["map"]);
                self.string(em, &p, "map").map(Effect::Map)
            }
            Some(other) => {
                self.schema(
                    &format!("{path}/effect"),
                    format!("expected \"direct\" or {{\"map\": expression}}, found {other}"),
                );
                None
            }
            None => None,
        };
        Some(TransitionRule {
            control: control?,
            effect: effect?,
        })
    }

    fn constraint(&mut self, v: &Json, path: &str) -> Option<Constraint> {
        let m = self.object(v, path)?;
        self.only(m, path, &["predicate", "tolerance", "description"]);
        let predicate = self.string(m, path, "predicate");
        let tolerance = match m.get("tolerance") {
            None => Some(DEFAULT_TOLERANCE),
            Some(t) => self.as_number(t, &format!("{path}/tolerance")),
        };
        let description = self.string(m, path, "description");
        Some(Constraint {
            predicate: predicate?,
            tolerance: tolerance?,
            description: description?,
        })
    }
}
