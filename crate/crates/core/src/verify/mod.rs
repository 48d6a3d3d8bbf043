//! Static checks and numeric constraint verification for interaction specs.
//!
//! A constraint is checked at every point of a finite deterministic grid
//! over the controllable inputs (see [`plan_sweep`]), with comparisons in
//! the predicate relaxed by the constraint's tolerance.

mod check;
mod resolved;
mod sweep;

pub use check::static_check;
pub use resolved::{NonFiniteValue, Resolved, State, StateError};
pub use sweep::{
    axis_samples, plan_sweep, SweepAxis, SweepPlan, DEFAULT_CAP, DEFAULT_GRID_POINTS,
    MIN_GRID_POINTS,
};

use serde::{Deserialize, Serialize};

use crate::docspec::InteractionSpec;
use crate::expr::{eval_relaxed, Env, EvalError, Relaxation, Value};
use crate::report::ValidationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerificationStatus {
    Verified,
    Violated,
    Degenerate,
    SkippedStatic,
}

impl VerificationStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            VerificationStatus::Verified => "verified",
            VerificationStatus::Violated => "violated",
            VerificationStatus::Degenerate => "degenerate",
            VerificationStatus::SkippedStatic => "skipped-static",
        }
    }

    /// Verified, degenerate and skipped-static all pass; only a violation fails.
    pub fn passes(self) -> bool {
        self != VerificationStatus::Violated
    }
}

/// A sample where the relaxed predicate was false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleViolation {
    /// Raw control values of the sample.
    pub env: Env,
    /// Values of the names the predicate references.
    pub inputs: Env,
}

/// A sample where some state variable was not finite; its predicate was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonFiniteSample {
    pub env: Env,
    pub variable: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub status: VerificationStatus,
    pub samples_checked: usize,
    pub tolerance: Option<f64>,
    pub truncated: bool,
    pub violations: Vec<SampleViolation>,
    pub non_finite: Vec<NonFiniteSample>,
}

impl VerificationReport {
    pub fn summary(&self) -> String {
        format!("{}, {} samples", self.status.as_str(), self.samples_checked)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("spec fails static checks:\n{0}")]
    Invalid(ValidationReport),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

/// Evaluates the constraint at every sample of `plan`.
pub fn verify_constraint(
    spec: &InteractionSpec,
    plan: &SweepPlan,
) -> Result<VerificationReport, VerifyError> {
    let resolved = Resolved::new(spec).map_err(VerifyError::Invalid)?;
    let (Some(predicate), Some(constraint)) = (&resolved.predicate, &spec.constraint) else {
        return Ok(VerificationReport {
            status: VerificationStatus::SkippedStatic,
            samples_checked: 0,
            tolerance: None,
            truncated: false,
            violations: Vec::new(),
            non_finite: Vec::new(),
        });
    };
    let relax = Relaxation {
        tolerance: constraint.tolerance,
    };
    let refs = predicate.free_vars();

    let mut samples_checked = 0;
    let mut violations = Vec::new();
    let mut non_finite = Vec::new();
    for raw in plan.samples() {
        samples_checked += 1;
        let state = resolved.evaluate(&raw)?;
        if !state.non_finite.is_empty() {
            non_finite.extend(state.non_finite.into_iter().map(|nf| NonFiniteSample {
                env: raw.clone(),
                variable: nf.variable,
                value: Value::Num(nf.value),
            }));
            continue;
        }
        let holds = eval_relaxed(predicate, &state.env, relax)?
            .as_bool()
            .expect("predicate kind checked statically");
        if !holds {
            let mut inputs = Env::new();
            for name in &refs {
                if let Some(v) = state.env.get(name) {
                    inputs = inputs.with(name, v);
                }
            }
            violations.push(SampleViolation { env: raw, inputs });
        }
    }

    let status = if !violations.is_empty() {
        VerificationStatus::Violated
    } else if !non_finite.is_empty() {
        VerificationStatus::Degenerate
    } else {
        VerificationStatus::Verified
    };
    Ok(VerificationReport {
        status,
        samples_checked,
        tolerance: Some(constraint.tolerance),
        truncated: plan.truncated,
        violations,
        non_finite,
    })
}

/// `plan_sweep` with the default grid and cap, then `verify_constraint`.
pub fn verify_default(spec: &InteractionSpec) -> Result<VerificationReport, VerifyError> {
    verify_constraint(spec, &plan_sweep(spec, DEFAULT_GRID_POINTS, DEFAULT_CAP))
}
