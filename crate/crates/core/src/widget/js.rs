//! Expression-to-script translation and number formatting shared by the
//! host (initial render) and the generated script.

use crate::expr::{BinaryOp, Constant, Expr, Func, UnaryOp};

/// Helpers every widget script defines. `pow` and `rnd` reproduce the
/// host's `powf` and half-away-from-zero `round`.
pub const PRELUDE: &str = "\
function pow(a, b) { if (a === 1 || (a === -1 && (b === Infinity || b === -Infinity))) return 1; return Math.pow(a, b); }
function rnd(x) { return x < 0 ? -Math.round(-x) : Math.round(x); }
function fmt(v, d) { return typeof v === \"boolean\" ? String(v) : v.toFixed(d); }
function clamp(v, lo, hi) { return v < lo ? lo : v > hi ? hi : v; }
";

/// Number literal as script source. Display output is the shortest
/// round-trip decimal and never uses an exponent, so the script parses the
/// same double.
pub fn js_number(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "Infinity" } else { "-Infinity" }.into()
    } else if v == 0.0 && v.is_sign_negative() {
        "-0".into()
    } else {
        format!("{v}")
    }
}

/// A double as the script's `String(x)` would print it for |x| >= 1e21.
fn js_exponential(v: f64) -> String {
    let s = format!("{v:e}");
    match s.split_once('e') {
        Some((m, e)) if !e.starts_with('-') => format!("{m}e+{e}"),
        _ => s,
    }
}

/// `Number.prototype.toFixed`: round half up on the exact binary value.
pub fn to_fixed(x: f64, digits: u32) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Infinity" } else { "-Infinity" }.into();
    }
    if x.abs() >= 1e21 {
        return js_exponential(x);
    }
    let neg = x < 0.0;
    let exact = format!("{:.1100}", x.abs());
    let (int_part, frac) = exact.split_once('.').expect("fixed precision output has a point");
    let d = digits as usize;
    let mut digits_buf: Vec<u8> = int_part.bytes().chain(frac[..d].bytes()).collect();
    if frac.as_bytes()[d] >= b'5' {
        let mut i = digits_buf.len();
        loop {
            if i == 0 {
                digits_buf.insert(0, b'1');
                break;
            }
            i -= 1;
            if digits_buf[i] == b'9' {
                digits_buf[i] = b'0';
            } else {
                digits_buf[i] += 1;
                break;
            }
        }
    }
    let split = digits_buf.len() - d;
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(std::str::from_utf8(&digits_buf[..split]).expect("ascii"));
    if d > 0 {
        out.push('.');
        out.push_str(std::str::from_utf8(&digits_buf[split..]).expect("ascii"));
    }
    out
}

/// Readout text for a value: booleans print as words, numbers via `to_fixed`.
pub fn display_value(v: crate::expr::Value, decimals: u32) -> String {
    match v {
        crate::expr::Value::Bool(b) => b.to_string(),
        crate::expr::Value::Num(x) => to_fixed(x, decimals),
    }
}

/// Quotes `s` as a script string literal.
pub fn js_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

/// Translates `e` to a fully parenthesized script expression. `var` maps
/// each variable name to its script spelling.
pub fn expr_to_js(e: &Expr, var: &dyn Fn(&str) -> String) -> String {
    match e {
        Expr::Num(v) => js_number(*v),
        Expr::Bool(b) => b.to_string(),
        Expr::Const(Constant::Pi) => "Math.PI".into(),
        Expr::Const(Constant::E) => "Math.E".into(),
        Expr::Var { name, .. } => var(name),
        Expr::Unary { op, operand } => {
            let inner = expr_to_js(operand, var);
            match op {
                UnaryOp::Neg => format!("(-{inner})"),
                UnaryOp::Not => format!("(!{inner})"),
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let a = expr_to_js(lhs, var);
            let b = expr_to_js(rhs, var);
            let sym = match op {
                BinaryOp::Pow => return format!("pow({a}, {b})"),
                BinaryOp::Eq => "===",
                BinaryOp::Ne => "!==",
                BinaryOp::And => "&&",
                BinaryOp::Or => "||",
                other => other.symbol(),
            };
            format!("({a} {sym} {b})")
        }
        Expr::Call { func, args } => {
            let args: Vec<String> = args.iter().map(|a| expr_to_js(a, var)).collect();
            let f = match func {
                Func::Round => "rnd",
                Func::Sin => "Math.sin",
                Func::Cos => "Math.cos",
                Func::Tan => "Math.tan",
                Func::Sqrt => "Math.sqrt",
                Func::Abs => "Math.abs",
                Func::Exp => "Math.exp",
                Func::Log => "Math.log",
                Func::Floor => "Math.floor",
                Func::Min => "Math.min",
                Func::Max => "Math.max",
            };
            format!("{f}({})", args.join(", "))
        }
    }
}

/// Script spelling of a state variable.
pub fn state_ref(name: &str) -> String {
    format!("s[{}]", js_string(name))
}
