//! Arithmetic/boolean expression language for derived variables, render
//! bindings, transition mappings and constraints.
//!
//! Grammar (lowest binding first):
//!
//! ```text
//! expr    = or ;
//! or      = and { "or" and } ;
//! and     = cmp { "and" cmp } ;
//! cmp     = add [ ( "<" | "<=" | ">" | ">=" | "==" | "!=" ) add ] ;
//! add     = mul { ( "+" | "-" ) mul } ;
//! mul     = unary { ( "*" | "/" ) unary } ;
//! unary   = ( "-" | "not" ) unary | power ;
//! power   = atom [ "^" unary ] ;
//! atom    = number | "true" | "false" | "pi" | "e" | name
//!         | func "(" expr { "," expr } ")" | "(" expr ")" ;
//! ```

mod ast;
mod deps;
mod eval;
mod format;
mod parser;

pub use ast::{is_reserved, BinaryOp, Constant, Expr, Func, Span, UnaryOp};
pub use deps::{dependency_order, CycleError, DerivedNode};
pub use eval::{
    eval_expr, eval_relaxed, infer_kind, AlreadyBound, Env, EvalError, Kind, KindError, Relaxation,
    Value,
};
pub(crate) use eval::js_max;
pub use format::{format_expr, format_number};
pub use parser::{parse_expr, ParseError, ParseErrorKind};

use std::collections::BTreeSet;

/// Parses `src` and returns the variables it references.
pub fn free_vars(e: &Expr) -> BTreeSet<String> {
    e.free_vars()
}

/// True when `name` matches identifier syntax: an ASCII letter followed by
/// letters, digits or underscores.
pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
