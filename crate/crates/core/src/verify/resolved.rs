use std::collections::BTreeMap;

use crate::docspec::{Control, Effect, InteractionSpec};
use crate::expr::{dependency_order, eval_expr, parse_expr, Env, EvalError, Expr, Value};
use crate::report::ValidationReport;

use super::check::static_check;

/// An interaction spec that passed `static_check`, with every state
/// expression parsed and derived variables in dependency order.
#[derive(Debug, Clone)]
pub struct Resolved<'a> {
    pub spec: &'a InteractionSpec,
    /// Derived variables in evaluation order.
    pub derived: Vec<(String, Expr)>,
    /// Parsed mapping effects keyed by controllable name.
    pub effects: BTreeMap<String, Expr>,
    pub predicate: Option<Expr>,
}

/// A state variable that evaluated to a non-finite number.
#[derive(Debug, Clone, PartialEq)]
pub struct NonFiniteValue {
    pub variable: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StateError {
    #[error("non-finite at defaults: variable {variable} = {value}")]
    NonFinite { variable: String, value: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Fully evaluated state at one sample: control values plus derived values.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub env: Env,
    pub non_finite: Vec<NonFiniteValue>,
}

impl<'a> Resolved<'a> {
    pub fn new(spec: &'a InteractionSpec) -> Result<Self, ValidationReport> {
        let report = static_check(spec);
        if !report.is_empty() {
            return Err(report);
        }
        let parse = |src: &str| parse_expr(src).expect("checked by static_check");
        let formulas: BTreeMap<&str, &str> = spec.derived().collect();
        let order = dependency_order(&spec.derived_nodes()).expect("checked by static_check");
        let derived = order
            .into_iter()
            .map(|n| {
                let e = parse(formulas[n.as_str()]);
                (n, e)
            })
            .collect();
        let effects = spec
            .transitions
            .iter()
            .filter_map(|t| match &t.effect {
                Effect::Map(src) => Some((t.control.clone(), parse(src))),
                Effect::Direct => None,
            })
            .collect();
        let predicate = spec.constraint.as_ref().map(|c| parse(&c.predicate));
        Ok(Resolved {
            spec,
            derived,
            effects,
            predicate,
        })
    }

    /// Raw control values at the defaults, keyed as the sweep keys them
    /// (`p.x`/`p.y` for drags). Includes controllable-kind variables of
    /// static specs, which act as constants.
    pub fn default_inputs(&self) -> Env {
        let mut env = Env::new();
        for v in &self.spec.state {
            match &v.control {
                Control::Slider { default, .. } => env = env.with(&v.name, *default),
                Control::Dropdown { options, default } => {
                    env = env.with(&v.name, options[*default].value);
                }
                Control::Toggle { default } => env = env.with(&v.name, *default),
                Control::Drag { default, .. } => {
                    env = env
                        .with(&format!("{}.x", v.name), default.x)
                        .with(&format!("{}.y", v.name), default.y);
                }
                Control::Derived { .. } => {}
            }
        }
        env
    }

    /// Applies transition effects to raw control values and evaluates every
    /// derived variable. Inputs missing from `raw` take their defaults.
    pub fn evaluate(&self, raw: &Env) -> Result<State, EvalError> {
        let defaults = self.default_inputs();
        let mut env = Env::new();
        let mut non_finite = Vec::new();
        for (name, default) in defaults.iter() {
            let input = raw.get(name).unwrap_or(default);
            let value = match self.effects.get(name) {
                Some(map) => eval_expr(map, &Env::new().with("value", input))?,
                None => input,
            };
            if let Value::Num(x) = value {
                if !x.is_finite() {
                    non_finite.push(NonFiniteValue {
                        variable: name.to_string(),
                        value: x,
                    });
                }
            }
            env = env.with(name, value);
        }
        for (name, e) in &self.derived {
            let value = eval_expr(e, &env)?;
            if let Value::Num(x) = value {
                if !x.is_finite() {
                    non_finite.push(NonFiniteValue {
                        variable: name.clone(),
                        value: x,
                    });
                }
            }
            env = env.with(name, value);
        }
        Ok(State { env, non_finite })
    }

    /// State at the defaults; any non-finite value is an error.
    pub fn initial_state(&self) -> Result<Env, StateError> {
        let state = self.evaluate(&Env::new())?;
        match state.non_finite.into_iter().next() {
            Some(NonFiniteValue { variable, value }) => Err(StateError::NonFinite { variable, value }),
            None => Ok(state.env),
        }
    }
}
