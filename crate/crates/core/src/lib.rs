//! Structured document specifications (DocSpecs) compiled into interactive
//! explanatory HTML.
//!
//! A DocSpec is a topic plus ordered knowledge units; each unit carries an
//! interaction spec split into state, render, transition and constraint
//! parts. This crate parses and validates DocSpecs, verifies constraints by
//! sweeping the controllable state space, compiles widgets deterministically,
//! and drives a planner/executor/evaluator pipeline over a pluggable
//! text-generation provider.

pub mod cli;
pub mod docspec;
pub mod expr;
pub mod html;
pub mod pipeline;
pub mod report;
pub mod service;
pub mod verify;
pub mod widget;

pub use report::{ValidationReport, Violation, ViolationKind};
