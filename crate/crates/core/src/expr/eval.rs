use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ast::{BinaryOp, Expr, Func, Span, UnaryOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Number,
    Boolean,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Number => "number",
            Kind::Boolean => "boolean",
        })
    }
}

/// A scalar produced by evaluation.
///
/// Serializes finite numbers as JSON numbers and non-finite ones as the
/// strings `"inf"`, `"-inf"` and `"NaN"` so reports survive a JSON round trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Num(f64),
    Bool(bool),
}

impl Value {
    pub fn kind(self) -> Kind {
        match self {
            Value::Num(_) => Kind::Number,
            Value::Bool(_) => Kind::Boolean,
        }
    }

    pub fn as_num(self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(v),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            Value::Num(_) => None,
        }
    }

    pub fn is_finite(self) -> bool {
        match self {
            Value::Num(v) => v.is_finite(),
            Value::Bool(_) => true,
        }
    }

    /// Bitwise identity for numbers (so NaN equals NaN), plain equality for booleans.
    pub fn same(self, other: Value) -> bool {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a.to_bits() == b.to_bits(),
            (Value::Bool(a), Value::Bool(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Value::Bool(b) => s.serialize_bool(b),
            Value::Num(v) if v.is_nan() => s.serialize_str("NaN"),
            Value::Num(v) if v == f64::INFINITY => s.serialize_str("inf"),
            Value::Num(v) if v == f64::NEG_INFINITY => s.serialize_str("-inf"),
            Value::Num(v) => crate::docspec::canonical_number(v).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            B(bool),
            N(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::B(b) => Ok(Value::Bool(b)),
            Raw::N(v) => Ok(Value::Num(v)),
            Raw::S(s) => match s.as_str() {
                "NaN" => Ok(Value::Num(f64::NAN)),
                "inf" => Ok(Value::Num(f64::INFINITY)),
                "-inf" => Ok(Value::Num(f64::NEG_INFINITY)),
                _ => Err(serde::de::Error::custom(format!("invalid scalar '{s}'"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("name '{0}' is already bound")]
pub struct AlreadyBound(pub String);

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Env {
    vars: BTreeMap<String, Value>,
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds a fresh name. Rebinding is an error.
    pub fn bind(&mut self, name: impl Into<String>, value: impl Into<Value>) -> Result<(), AlreadyBound> {
        let name = name.into();
        if self.vars.contains_key(&name) {
            return Err(AlreadyBound(name));
        }
        self.vars.insert(name, value.into());
        Ok(())
    }

    /// Builder-style binding for tests and literals; panics on rebinding.
    pub fn with(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.bind(name, value).expect("duplicate binding");
        self
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.vars.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vars.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Value)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable '{name}' at {span}")]
    Unbound { name: String, span: Span },
    #[error("kind mismatch in {context}: expected {expected}, found {found}")]
    KindMismatch {
        context: String,
        expected: Kind,
        found: Kind,
    },
}

/// Comparison relaxation used when checking constraints.
///
/// With a tolerance `t`, `a == b` holds when `|a - b| <= t`, `a < b` when
/// `a < b + t`, `a > b` when `a > b - t`, and likewise for the non-strict
/// and negated forms. Boolean equality is never relaxed.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Relaxation {
    pub tolerance: f64,
}

/// Evaluates with standard IEEE-754 double semantics.
pub fn eval_expr(e: &Expr, env: &Env) -> Result<Value, EvalError> {
    Evaluator { env, relax: None }.eval(e)
}

/// Evaluates with comparisons relaxed by `relax`.
pub fn eval_relaxed(e: &Expr, env: &Env, relax: Relaxation) -> Result<Value, EvalError> {
    Evaluator {
        env,
        relax: Some(relax),
    }
    .eval(e)
}

struct Evaluator<'a> {
    env: &'a Env,
    relax: Option<Relaxation>,
}

impl Evaluator<'_> {
    fn num(&self, e: &Expr, context: &str) -> Result<f64, EvalError> {
        match self.eval(e)? {
            Value::Num(v) => Ok(v),
            Value::Bool(_) => Err(EvalError::KindMismatch {
                context: context.to_string(),
                expected: Kind::Number,
                found: Kind::Boolean,
            }),
        }
    }

    fn boolean(&self, e: &Expr, context: &str) -> Result<bool, EvalError> {
        match self.eval(e)? {
            Value::Bool(b) => Ok(b),
            Value::Num(_) => Err(EvalError::KindMismatch {
                context: context.to_string(),
                expected: Kind::Boolean,
                found: Kind::Number,
            }),
        }
    }

    fn eval(&self, e: &Expr) -> Result<Value, EvalError> {
        Ok(match e {
            Expr::Num(v) => Value::Num(*v),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Const(c) => Value::Num(c.value()),
            Expr::Var { name, span } => self.env.get(name).ok_or_else(|| EvalError::Unbound {
                name: name.clone(),
                span: *span,
            })?,
            Expr::Unary { op: UnaryOp::Neg, operand } => Value::Num(-self.num(operand, "'-'")?),
            Expr::Unary { op: UnaryOp::Not, operand } => Value::Bool(!self.boolean(operand, "'not'")?),
            Expr::Binary { op, lhs, rhs } => self.binary(*op, lhs, rhs)?,
            Expr::Call { func, args } => {
                let ctx = func.name();
                match func {
                    Func::Min | Func::Max => {
                        let a = self.num(&args[0], ctx)?;
                        let b = self.num(&args[1], ctx)?;
                        Value::Num(if *func == Func::Min { js_min(a, b) } else { js_max(a, b) })
                    }
                    _ => Value::Num(apply_unary_func(*func, self.num(&args[0], ctx)?)),
                }
            }
        })
    }

    fn binary(&self, op: BinaryOp, lhs: &Expr, rhs: &Expr) -> Result<Value, EvalError> {
        let ctx = op.symbol();
        match op {
            BinaryOp::And => {
                // short-circuits like the generated widget script
                if !self.boolean(lhs, ctx)? {
                    return Ok(Value::Bool(false));
                }
                Ok(Value::Bool(self.boolean(rhs, ctx)?))
            }
            BinaryOp::Or => {
                if self.boolean(lhs, ctx)? {
                    return Ok(Value::Bool(true));
                }
                Ok(Value::Bool(self.boolean(rhs, ctx)?))
            }
            BinaryOp::Eq | BinaryOp::Ne => {
                let a = self.eval(lhs)?;
                let b = self.eval(rhs)?;
                let equal = match (a, b) {
                    (Value::Num(x), Value::Num(y)) => match self.relax {
                        Some(r) => (x - y).abs() <= r.tolerance,
                        None => x == y,
                    },
                    (Value::Bool(x), Value::Bool(y)) => x == y,
                    (x, y) => {
                        return Err(EvalError::KindMismatch {
                            context: ctx.to_string(),
                            expected: x.kind(),
                            found: y.kind(),
                        })
                    }
                };
                Ok(Value::Bool(if op == BinaryOp::Eq { equal } else { !equal }))
            }
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
                let a = self.num(lhs, ctx)?;
                let b = self.num(rhs, ctx)?;
                let t = self.relax.map_or(0.0, |r| r.tolerance);
                Ok(Value::Bool(match op {
                    BinaryOp::Lt => a < b + t,
                    BinaryOp::Le => a <= b + t,
                    BinaryOp::Gt => a > b - t,
                    _ => a >= b - t,
                }))
            }
            _ => {
                let a = self.num(lhs, ctx)?;
                let b = self.num(rhs, ctx)?;
                Ok(Value::Num(apply_arith(op, a, b)))
            }
        }
    }
}

pub(crate) fn apply_arith(op: BinaryOp, a: f64, b: f64) -> f64 {
    match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => a / b,
        BinaryOp::Pow => a.powf(b),
        _ => unreachable!("not an arithmetic operator: {op:?}"),
    }
}

pub(crate) fn apply_unary_func(f: Func, x: f64) -> f64 {
    match f {
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Tan => x.tan(),
        Func::Sqrt => x.sqrt(),
        Func::Abs => x.abs(),
        Func::Exp => x.exp(),
        Func::Log => x.ln(),
        Func::Floor => x.floor(),
        // half away from zero; the widget script emits the same rule
        Func::Round => x.round(),
        Func::Min | Func::Max => unreachable!("binary function"),
    }
}

/// `min` with NaN propagation and `-0 < +0`, matching `Math.min`.
pub(crate) fn js_min(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a < b {
        a
    } else if b < a {
        b
    } else if a.is_sign_negative() {
        a
    } else {
        b
    }
}

/// `max` with NaN propagation and `+0 > -0`, matching `Math.max`.
pub(crate) fn js_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a > b {
        a
    } else if b > a {
        b
    } else if a.is_sign_positive() {
        a
    } else {
        b
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message}")]
pub struct KindError {
    pub message: String,
    pub span: Option<Span>,
}

/// Static kind inference. `lookup` gives the kind of each variable; unknown
/// names are reported with their span.
pub fn infer_kind(e: &Expr, lookup: &dyn Fn(&str) -> Option<Kind>) -> Result<Kind, KindError> {
    let want = |e: &Expr, expected: Kind, ctx: &str| -> Result<(), KindError> {
        let k = infer_kind(e, lookup)?;
        if k != expected {
            return Err(KindError {
                message: format!("{ctx} expects a {expected} operand but got a {k}"),
                span: first_span(e),
            });
        }
        Ok(())
    };
    match e {
        Expr::Num(_) | Expr::Const(_) => Ok(Kind::Number),
        Expr::Bool(_) => Ok(Kind::Boolean),
        Expr::Var { name, span } => lookup(name).ok_or_else(|| KindError {
            message: format!("undefined variable {name}"),
            span: Some(*span),
        }),
        Expr::Unary { op: UnaryOp::Neg, operand } => {
            want(operand, Kind::Number, "'-'")?;
            Ok(Kind::Number)
        }
        Expr::Unary { op: UnaryOp::Not, operand } => {
            want(operand, Kind::Boolean, "'not'")?;
            Ok(Kind::Boolean)
        }
        Expr::Binary { op, lhs, rhs } => {
            let ctx = format!("'{}'", op.symbol());
            if op.is_logical() {
                want(lhs, Kind::Boolean, &ctx)?;
                want(rhs, Kind::Boolean, &ctx)?;
                Ok(Kind::Boolean)
            } else if matches!(op, BinaryOp::Eq | BinaryOp::Ne) {
                let l = infer_kind(lhs, lookup)?;
                want(rhs, l, &ctx)?;
                Ok(Kind::Boolean)
            } else if op.is_comparison() {
                want(lhs, Kind::Number, &ctx)?;
                want(rhs, Kind::Number, &ctx)?;
                Ok(Kind::Boolean)
            } else {
                want(lhs, Kind::Number, &ctx)?;
                want(rhs, Kind::Number, &ctx)?;
                Ok(Kind::Number)
            }
        }
        Expr::Call { func, args } => {
            let ctx = format!("'{}'", func.name());
            for a in args {
                want(a, Kind::Number, &ctx)?;
            }
            Ok(Kind::Number)
        }
    }
}

fn first_span(e: &Expr) -> Option<Span> {
    let mut out = None;
    e.visit_vars(&mut |_, s| {
        if out.is_none() {
            out = Some(s);
        }
    });
    out
}
