//! Deterministic compilation of an interaction spec into a self-contained
//! HTML/CSS/script widget, plus the structural contract LLM-written widgets
//! are held to.
//!
//! Primitives live in a `[0,10] x [0,10]` unit space with y up, drawn on a
//! 400x300 SVG viewport: `px = 40 x`, `py = 300 - 30 y`, radii scale by 30.

mod contract;
mod js;

pub use contract::{contract_census, script_identifiers, validate_widget_contract, ContractCensus};
pub use js::{display_value, expr_to_js, js_number, to_fixed, PRELUDE};

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::docspec::{
    parse_template, Binding, Control, InteractionSpec, RenderPrimitive, TemplatePart, DEFAULT_DECIMALS,
    DEFAULT_PLOT_SAMPLES,
};
use crate::expr::{eval_expr, format_number, js_max, parse_expr, Env, Expr, Value};
use crate::html::escape as esc;
use crate::report::ValidationReport;
use crate::verify::{Resolved, StateError};
use js::{js_string, state_ref};

pub const VIEW_WIDTH: f64 = 400.0;
pub const VIEW_HEIGHT: f64 = 300.0;
pub const UNIT_SPAN: f64 = 10.0;
const X_SCALE: f64 = VIEW_WIDTH / UNIT_SPAN;
const Y_SCALE: f64 = VIEW_HEIGHT / UNIT_SPAN;
/// Decimal places for SVG attribute values.
const ATTR_DECIMALS: u32 = 2;
const HANDLE_RADIUS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestRole {
    Control,
    Readout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub variable: String,
    pub element_id: String,
    pub role: ManifestRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidgetFragment {
    pub container_id: String,
    /// The complete fragment: one root `div` holding style, controls, SVG and script.
    pub html: String,
    pub style: String,
    pub script: String,
    pub manifest: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompileError {
    #[error("container id '{0}' must be a letter followed by letters, digits, '-' or '_'")]
    BadContainerId(String),
    #[error("spec fails static checks:\n{0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("unsupported primitive kind {0}")]
    Unsupported(String),
}

pub fn is_container_id(id: &str) -> bool {
    let mut chars = id.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Controllables at their defaults and every derived variable evaluated in
/// dependency order.
pub fn render_initial_state(spec: &InteractionSpec) -> Result<Env, CompileError> {
    let resolved = Resolved::new(spec).map_err(CompileError::Invalid)?;
    Ok(resolved.initial_state()?)
}

fn attr_num(v: f64) -> String {
    to_fixed(v, ATTR_DECIMALS)
}

/// Decimal places implied by a slider step (`0.05` gives 2).
fn step_decimals(step: f64) -> u32 {
    let s = format_number(step);
    s.split_once('.').map_or(0, |(_, f)| f.len().min(20) as u32)
}

/// A numeric binding in both host-evaluated and script forms.
struct Num {
    value: f64,
    js: String,
}

struct Ctx<'a> {
    env: &'a Env,
}

impl Ctx<'_> {
    fn binding(&self, b: &Binding) -> Num {
        match b {
            Binding::Literal(v) => Num {
                value: *v,
                js: js_number(*v),
            },
            Binding::Expr(src) => {
                let e = parse_expr(src).expect("checked by static_check");
                self.expr_num(&e, self.env, &|n| state_ref(n))
            }
        }
    }

    fn expr_num(&self, e: &Expr, env: &Env, var: &dyn Fn(&str) -> String) -> Num {
        let value = match eval_expr(e, env) {
            Ok(Value::Num(v)) => v,
            _ => f64::NAN,
        };
        Num {
            value,
            js: expr_to_js(e, var),
        }
    }
}

fn px(v: &Num) -> Num {
    Num {
        value: v.value * X_SCALE,
        js: format!("({} * {})", v.js, js_number(X_SCALE)),
    }
}

fn py(v: &Num) -> Num {
    Num {
        value: VIEW_HEIGHT - v.value * Y_SCALE,
        js: format!("({} - {} * {})", js_number(VIEW_HEIGHT), v.js, js_number(Y_SCALE)),
    }
}

fn radius(v: &Num) -> Num {
    Num {
        value: (v.value * Y_SCALE).abs(),
        js: format!("Math.abs({} * {})", v.js, js_number(Y_SCALE)),
    }
}

fn non_negative(v: Num) -> Num {
    Num {
        value: js_max(0.0, v.value),
        js: format!("Math.max(0, {})", v.js),
    }
}

fn sum(a: &Num, b: &Num) -> Num {
    Num {
        value: a.value + b.value,
        js: format!("({} + {})", a.js, b.js),
    }
}

/// Script statements that refresh one element, plus its initial markup.
struct Drawn {
    markup: String,
    updates: Vec<String>,
}

fn set_attr(id: &str, attr: &str, n: &Num) -> String {
    format!(
        "$({}).setAttribute({}, fmt({}, {ATTR_DECIMALS}));",
        js_string(id),
        js_string(attr),
        n.js
    )
}

/// Compiles `spec` into a widget rooted at `<div id="{container_id}">`.
pub fn compile_widget(spec: &InteractionSpec, container_id: &str) -> Result<WidgetFragment, CompileError> {
    if !is_container_id(container_id) {
        return Err(CompileError::BadContainerId(container_id.to_string()));
    }
    let resolved = Resolved::new(spec).map_err(CompileError::Invalid)?;
    let env = resolved.initial_state()?;
    let cid = container_id;
    let ctx = Ctx { env: &env };
    let mut manifest = Vec::new();
    let mut readout_vars: BTreeSet<String> = BTreeSet::new();

    // Controls.
    let mut controls = String::new();
    let mut wiring = String::new();
    let mut render_updates: Vec<String> = Vec::new();
    let mut handles = String::new();
    let mut drag_index = 0;
    for (ci, v) in spec.controllables().enumerate() {
        let id = format!("{cid}-{}", v.name);
        let assign = || -> String {
            match resolved.effects.get(&v.name) {
                Some(map) => {
                    let mapped = expr_to_js(map, &|n| if n == "value" { "value".into() } else { state_ref(n) });
                    format!("s[{}] = {mapped};", js_string(&v.name))
                }
                None => format!("s[{}] = value;", js_string(&v.name)),
            }
        };
        match &v.control {
            Control::Slider {
                min,
                max,
                step,
                default,
            } => {
                let out_id = format!("{id}-value");
                let decimals = step_decimals(*step);
                let shown = env.get(&v.name).map(|x| display_value(x, decimals)).unwrap_or_default();
                let _ = writeln!(
                    controls,
                    "<label for=\"{id}\"><span class=\"dw-name\">{name}</span>\
                     <input type=\"range\" id=\"{id}\" min=\"{min}\" max=\"{max}\" step=\"{step}\" value=\"{default}\">\
                     <output id=\"{out_id}\">{shown}</output></label>",
                    name = esc(&v.name),
                    min = format_number(*min),
                    max = format_number(*max),
                    step = format_number(*step),
                    default = format_number(*default),
                );
                let _ = writeln!(
                    wiring,
                    "var c{ci} = $({q}); c{ci}.addEventListener(\"input\", function () {{ var value = parseFloat(c{ci}.value); {a} update(); }});",
                    q = js_string(&id),
                    a = assign(),
                );
                render_updates.push(format!(
                    "$({}).textContent = fmt({}, {decimals});",
                    js_string(&out_id),
                    state_ref(&v.name)
                ));
            }
            Control::Dropdown { options, default } => {
                let _ = write!(
                    controls,
                    "<label for=\"{id}\"><span class=\"dw-name\">{}</span><select id=\"{id}\">",
                    esc(&v.name)
                );
                for (i, o) in options.iter().enumerate() {
                    let sel = if i == *default { " selected" } else { "" };
                    let _ = write!(controls, "<option value=\"{i}\"{sel}>{}</option>", esc(&o.label));
                }
                controls.push_str("</select></label>\n");
                let values: Vec<String> = options.iter().map(|o| js_number(o.value)).collect();
                let _ = writeln!(
                    wiring,
                    "var c{ci} = $({q}); var o{ci} = [{vals}]; c{ci}.addEventListener(\"change\", function () {{ var value = o{ci}[c{ci}.selectedIndex]; {a} update(); }});",
                    q = js_string(&id),
                    vals = values.join(", "),
                    a = assign(),
                );
            }
            Control::Toggle { default } => {
                let checked = if *default { " checked" } else { "" };
                let _ = writeln!(
                    controls,
                    "<label for=\"{id}\"><input type=\"checkbox\" id=\"{id}\"{checked}><span class=\"dw-name\">{}</span></label>",
                    esc(&v.name)
                );
                let _ = writeln!(
                    wiring,
                    "var c{ci} = $({q}); c{ci}.addEventListener(\"change\", function () {{ var value = c{ci}.checked; {a} update(); }});",
                    q = js_string(&id),
                    a = assign(),
                );
            }
            Control::Drag {
                x_min,
                x_max,
                y_min,
                y_max,
                ..
            } => {
                let hid = format!("{id}-handle");
                let xn = format!("{}.x", v.name);
                let yn = format!("{}.y", v.name);
                let x = Num {
                    value: env.get(&xn).and_then(Value::as_num).unwrap_or(f64::NAN),
                    js: state_ref(&xn),
                };
                let y = Num {
                    value: env.get(&yn).and_then(Value::as_num).unwrap_or(f64::NAN),
                    js: state_ref(&yn),
                };
                let (cx, cy) = (px(&x), py(&y));
                let _ = writeln!(
                    handles,
                    "<circle id=\"{hid}\" class=\"dw-handle\" cx=\"{}\" cy=\"{}\" r=\"{}\"/>",
                    attr_num(cx.value),
                    attr_num(cy.value),
                    format_number(HANDLE_RADIUS)
                );
                render_updates.push(set_attr(&hid, "cx", &cx));
                render_updates.push(set_attr(&hid, "cy", &cy));
                let d = drag_index;
                drag_index += 1;
                let _ = writeln!(
                    wiring,
                    "var h{d} = $({q}); var drag{d} = false;\n\
                     h{d}.addEventListener(\"pointerdown\", function (ev) {{ drag{d} = true; h{d}.setPointerCapture(ev.pointerId); ev.preventDefault(); }});\n\
                     h{d}.addEventListener(\"pointermove\", function (ev) {{ if (!drag{d}) return; var u = toUnit(ev); s[{qx}] = clamp(u[0], {x_min}, {x_max}); s[{qy}] = clamp(u[1], {y_min}, {y_max}); update(); }});\n\
                     h{d}.addEventListener(\"pointerup\", function () {{ drag{d} = false; }});",
                    q = js_string(&hid),
                    qx = js_string(&xn),
                    qy = js_string(&yn),
                    x_min = js_number(*x_min),
                    x_max = js_number(*x_max),
                    y_min = js_number(*y_min),
                    y_max = js_number(*y_max),
                );
                manifest.push(ManifestEntry {
                    variable: v.name.clone(),
                    element_id: hid,
                    role: ManifestRole::Control,
                });
                continue;
            }
            Control::Derived { .. } => continue,
        }
        manifest.push(ManifestEntry {
            variable: v.name.clone(),
            element_id: id,
            role: ManifestRole::Control,
        });
    }

    // Render primitives.
    let mut shapes = String::new();
    for (i, p) in spec.render.iter().enumerate() {
        let pid = format!("{cid}-p{i}");
        let drawn = draw(&ctx, p, &pid, &mut manifest, &mut readout_vars, spec)?;
        shapes.push_str(&drawn.markup);
        render_updates.extend(drawn.updates);
    }

    let style = format!(
        "#{cid} {{ font: 14px/1.4 system-ui, sans-serif; max-width: 400px; }}\n\
         #{cid} .dw-controls {{ display: flex; flex-wrap: wrap; gap: 6px 16px; margin-bottom: 6px; }}\n\
         #{cid} .dw-controls label {{ display: flex; align-items: center; gap: 6px; }}\n\
         #{cid} .dw-name {{ font-family: ui-monospace, monospace; }}\n\
         #{cid} svg {{ width: 100%; height: auto; background: #fafafa; border: 1px solid #ddd; touch-action: none; }}\n\
         #{cid} .dw-handle {{ fill: #d62728; fill-opacity: 0.8; cursor: grab; }}\n"
    );

    let mut state_json = String::from("{");
    for (k, (name, value)) in env.iter().enumerate() {
        if k > 0 {
            state_json.push_str(", ");
        }
        let v = match value {
            Value::Num(x) => js_number(x),
            Value::Bool(b) => b.to_string(),
        };
        let _ = write!(state_json, "{}: {v}", js_string(name));
    }
    state_json.push('}');

    let mut derive = String::new();
    for (name, e) in &resolved.derived {
        let _ = writeln!(derive, "  s[{}] = {};", js_string(name), expr_to_js(e, &|n| state_ref(n)));
    }

    let mut script = String::new();
    let _ = writeln!(script, "(function () {{\n\"use strict\";");
    script.push_str(PRELUDE);
    let _ = writeln!(
        script,
        "var ns = window.__docspec || (window.__docspec = {{}});\n\
         var w = ns[{q}] = {{}};\n\
         function $(id) {{ return document.getElementById(id); }}\n\
         var s = {state_json};\n\
         w.state = s;\n\
         function derive() {{\n{derive}}}\n\
         function render() {{\n  {updates}\n}}\n\
         function update() {{ derive(); render(); }}\n\
         w.update = update;",
        q = js_string(cid),
        updates = render_updates.join("\n  "),
    );
    if drag_index > 0 {
        let _ = writeln!(
            script,
            "var svg = $({});\n\
             function toUnit(ev) {{ var b = svg.getBoundingClientRect(); var x = (ev.clientX - b.left) * {w} / b.width; var y = (ev.clientY - b.top) * {h} / b.height; return [x / {xs}, ({h} - y) / {ys}]; }}",
            js_string(&format!("{cid}-svg")),
            w = js_number(VIEW_WIDTH),
            h = js_number(VIEW_HEIGHT),
            xs = js_number(X_SCALE),
            ys = js_number(Y_SCALE),
        );
    }
    script.push_str(&wiring);
    script.push_str("update();\n})();\n");

    let mut html = String::new();
    let _ = writeln!(html, "<div id=\"{cid}\" class=\"docspec-widget\">");
    let _ = write!(html, "<style>\n{style}</style>\n");
    if !controls.is_empty() {
        let _ = write!(html, "<div class=\"dw-controls\">\n{controls}</div>\n");
    }
    let _ = write!(
        html,
        "<svg id=\"{cid}-svg\" viewBox=\"0 0 {w} {h}\" role=\"img\">\n{shapes}{handles}</svg>\n",
        w = format_number(VIEW_WIDTH),
        h = format_number(VIEW_HEIGHT),
    );
    let _ = write!(html, "<script>\n{script}</script>\n</div>\n");

    Ok(WidgetFragment {
        container_id: cid.to_string(),
        html,
        style,
        script,
        manifest,
    })
}

fn draw(
    ctx: &Ctx<'_>,
    p: &RenderPrimitive,
    pid: &str,
    manifest: &mut Vec<ManifestEntry>,
    readout_vars: &mut BTreeSet<String>,
    spec: &InteractionSpec,
) -> Result<Drawn, CompileError> {
    let mut updates = Vec::new();
    let mut attrs: Vec<(&str, Num)> = Vec::new();
    let paint = |fill: bool, default: &str| -> String {
        let c = esc(p.color().unwrap_or(default));
        if fill {
            format!(" fill=\"{c}\"")
        } else {
            format!(" fill=\"none\" stroke=\"{c}\" stroke-width=\"2\"")
        }
    };
    let markup = match p {
        RenderPrimitive::Circle {
            center_x,
            center_y,
            radius: r,
            ..
        } => {
            attrs.push(("cx", px(&ctx.binding(center_x))));
            attrs.push(("cy", py(&ctx.binding(center_y))));
            attrs.push(("r", radius(&ctx.binding(r))));
            format!("<circle id=\"{pid}\"{}{}/>\n", attr_list(&attrs), paint(true, "#4a78c2"))
        }
        RenderPrimitive::Rect {
            x,
            y,
            width,
            height,
            ..
        } => {
            let (x, y, w, h) = (
                ctx.binding(x),
                ctx.binding(y),
                ctx.binding(width),
                ctx.binding(height),
            );
            attrs.push(("x", px(&x)));
            attrs.push(("y", py(&sum(&y, &h))));
            attrs.push((
                "width",
                non_negative(Num {
                    value: w.value * X_SCALE,
                    js: format!("({} * {})", w.js, js_number(X_SCALE)),
                }),
            ));
            attrs.push((
                "height",
                non_negative(Num {
                    value: h.value * Y_SCALE,
                    js: format!("({} * {})", h.js, js_number(Y_SCALE)),
                }),
            ));
            format!("<rect id=\"{pid}\"{}{}/>\n", attr_list(&attrs), paint(true, "#4a78c2"))
        }
        RenderPrimitive::Line { x1, y1, x2, y2, .. } => {
            attrs.push(("x1", px(&ctx.binding(x1))));
            attrs.push(("y1", py(&ctx.binding(y1))));
            attrs.push(("x2", px(&ctx.binding(x2))));
            attrs.push(("y2", py(&ctx.binding(y2))));
            format!("<line id=\"{pid}\"{}{}/>\n", attr_list(&attrs), paint(false, "#333"))
        }
        RenderPrimitive::Polyline { points, .. } => {
            let pts: Vec<(Num, Num)> = points
                .iter()
                .map(|(x, y)| (px(&ctx.binding(x)), py(&ctx.binding(y))))
                .collect();
            let initial: Vec<String> = pts
                .iter()
                .map(|(x, y)| format!("{},{}", attr_num(x.value), attr_num(y.value)))
                .collect();
            let js_parts: Vec<String> = pts
                .iter()
                .map(|(x, y)| format!("fmt({}, {ATTR_DECIMALS}) + \",\" + fmt({}, {ATTR_DECIMALS})", x.js, y.js))
                .collect();
            updates.push(format!(
                "$({}).setAttribute(\"points\", [{}].join(\" \"));",
                js_string(pid),
                js_parts.join(", ")
            ));
            format!(
                "<polyline id=\"{pid}\" points=\"{}\"{}/>\n",
                initial.join(" "),
                paint(false, "#333")
            )
        }
        RenderPrimitive::Label {
            x,
            y,
            text_template,
            decimals,
            ..
        } => {
            let d = decimals.unwrap_or(DEFAULT_DECIMALS);
            attrs.push(("x", px(&ctx.binding(x))));
            attrs.push(("y", py(&ctx.binding(y))));
            let parts = parse_template(text_template).expect("checked by static_check");
            let mut body = String::new();
            for (j, part) in parts.iter().enumerate() {
                match part {
                    TemplatePart::Text(t) => body.push_str(&esc(t)),
                    TemplatePart::Expr { source, .. } => {
                        let e = parse_expr(source).expect("checked by static_check");
                        let tid = format!("{pid}-e{j}");
                        let value = eval_expr(&e, ctx.env).unwrap_or(Value::Num(f64::NAN));
                        let _ = write!(body, "<tspan id=\"{tid}\">{}</tspan>", esc(&display_value(value, d)));
                        updates.push(format!(
                            "$({}).textContent = fmt({}, {d});",
                            js_string(&tid),
                            expr_to_js(&e, &|n| state_ref(n))
                        ));
                        for name in e.free_vars() {
                            let derived = spec.variable(&name).is_some_and(|v| !v.is_controllable());
                            if derived && readout_vars.insert(name.clone()) {
                                manifest.push(ManifestEntry {
                                    variable: name,
                                    element_id: tid.clone(),
                                    role: ManifestRole::Readout,
                                });
                            }
                        }
                    }
                }
            }
            let fill = esc(p.color().unwrap_or("#222"));
            format!("<text id=\"{pid}\"{} fill=\"{fill}\">{body}</text>\n", attr_list(&attrs))
        }
        RenderPrimitive::Plot {
            variable,
            expr,
            from,
            to,
            samples,
            ..
        } => {
            let n = samples.unwrap_or(DEFAULT_PLOT_SAMPLES).max(2);
            let e = parse_expr(expr).expect("checked by static_check");
            let (a, b) = (ctx.binding(from), ctx.binding(to));
            let mut pts = Vec::new();
            for i in 0..n {
                let t = a.value + (b.value - a.value) * (i as f64) / ((n - 1) as f64);
                let mut env = ctx.env.clone();
                if env.bind(variable.clone(), t).is_err() {
                    return Err(CompileError::Unsupported(format!("plot variable {variable} shadows state")));
                }
                let yv = match eval_expr(&e, &env) {
                    Ok(Value::Num(v)) => v,
                    _ => f64::NAN,
                };
                let (sx, sy) = (t * X_SCALE, VIEW_HEIGHT - yv * Y_SCALE);
                if sx.is_finite() && sy.is_finite() {
                    pts.push(format!("{},{}", attr_num(sx), attr_num(sy)));
                }
            }
            let local = format!("t_{variable}");
            let body = expr_to_js(&e, &|nm| if nm == variable { local.clone() } else { state_ref(nm) });
            updates.push(format!(
                "(function () {{ var a = {a}, b = {b}, n = {n}, pts = []; for (var i = 0; i < n; i++) {{ var {local} = a + (b - a) * i / (n - 1); var y = {body}; var sx = {local} * {xs}, sy = {h} - y * {ys}; if (isFinite(sx) && isFinite(sy)) pts.push(fmt(sx, {ATTR_DECIMALS}) + \",\" + fmt(sy, {ATTR_DECIMALS})); }} $({id}).setAttribute(\"points\", pts.join(\" \")); }})();",
                a = a.js,
                b = b.js,
                xs = js_number(X_SCALE),
                ys = js_number(Y_SCALE),
                h = js_number(VIEW_HEIGHT),
                id = js_string(pid),
            ));
            format!(
                "<polyline id=\"{pid}\" points=\"{}\"{}/>\n",
                pts.join(" "),
                paint(false, "#2ca02c")
            )
        }
    };
    let mut all: Vec<String> = attrs.iter().map(|(name, n)| set_attr(pid, name, n)).collect();
    all.extend(updates);
    Ok(Drawn {
        markup,
        updates: all,
    })
}

fn attr_list(attrs: &[(&str, Num)]) -> String {
    attrs
        .iter()
        .map(|(k, v)| format!(" {k}=\"{}\"", attr_num(v.value)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docspec::test_support::pi_interaction;
    use crate::docspec::{Effect, StateVariable, TransitionRule};
    use crate::html::{validate_fragment, FragmentPolicy};

    #[test]
    fn pi_widget_shape() {
        let w = compile_widget(&pi_interaction(), "w-1").unwrap();
        assert!(w.html.starts_with("<div id=\"w-1\""));
        assert_eq!(w.html.matches("<input").count(), 1);
        assert!(w.html.contains("type=\"range\" id=\"w-1-r\" min=\"0.5\" max=\"5\" step=\"0.05\" value=\"1\""));
        assert!(w.html.contains("<circle id=\"w-1-p0\" cx=\"200.00\" cy=\"150.00\" r=\"30.00\""));
        assert!(w.html.contains(">3.14159</tspan>"));
        assert!(w.html.contains(">6.28319</tspan>"));
        assert!(w.script.contains("s[\"r\"]"));
        let readouts: Vec<_> = w
            .manifest
            .iter()
            .filter(|m| m.role == ManifestRole::Readout)
            .map(|m| m.variable.as_str())
            .collect();
        assert_eq!(readouts, ["C", "D", "ratio"]);
        let r = validate_fragment(&w.html, &FragmentPolicy::default());
        assert!(r.is_empty(), "{r}");
    }

    #[test]
    fn deterministic() {
        let a = compile_widget(&pi_interaction(), "w-1").unwrap();
        let b = compile_widget(&pi_interaction(), "w-1").unwrap();
        assert_eq!(a, b);
        let c = compile_widget(&pi_interaction(), "w-2").unwrap();
        assert_ne!(a.html, c.html);
    }

    #[test]
    fn static_spec_has_no_inputs() {
        let mut s = pi_interaction();
        s.transitions.clear();
        s.constraint = None;
        let w = compile_widget(&s, "w").unwrap();
        assert!(!w.html.contains("<input"));
        assert!(!w.html.contains("class=\"dw-controls\""));
    }

    #[test]
    fn bad_container_id() {
        assert!(matches!(
            compile_widget(&pi_interaction(), "1bad"),
            Err(CompileError::BadContainerId(_))
        ));
    }

    #[test]
    fn toggle_initial_state() {
        let s = InteractionSpec {
            state: vec![
                StateVariable {
                    name: "x".into(),
                    control: Control::Toggle { default: false },
                },
                StateVariable {
                    name: "y".into(),
                    control: Control::Derived {
                        formula: "not x".into(),
                    },
                },
            ],
            transitions: vec![TransitionRule {
                control: "x".into(),
                effect: Effect::Direct,
            }],
            constraint: Some(crate::docspec::Constraint {
                predicate: "y != x".into(),
                tolerance: 1e-3,
                description: "y negates x".into(),
            }),
            ..Default::default()
        };
        let env = render_initial_state(&s).unwrap();
        assert_eq!(env.get("x"), Some(Value::Bool(false)));
        assert_eq!(env.get("y"), Some(Value::Bool(true)));
    }

    #[test]
    fn step_decimals_from_display() {
        assert_eq!(step_decimals(0.05), 2);
        assert_eq!(step_decimals(1.0), 0);
        assert_eq!(step_decimals(0.125), 3);
    }
}
