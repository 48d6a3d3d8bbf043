//! C ABI over the docspec library.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Strings returned through `char **` out
//! parameters are owned by the caller and released with
//! [`docspec_string_free`]. Every fallible call returns a [`DocspecStatus`];
//! on failure [`docspec_last_error`] describes what went wrong.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use docspec::docspec::{docspec_from_json, serialize_docspec, validate_docspec, DocSpec};
use docspec::{ValidationReport, ViolationKind};
use docspec::expr::{eval_expr, format_expr, parse_expr, Env, Expr, Value};
use docspec::verify::{plan_sweep, verify_constraint, VerificationStatus};
use docspec::widget::compile_widget;
use serde_json::json;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocspecStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The input could not be parsed. The last error holds the report.
    Parse = 3,
    /// The input parsed but failed validation. The last error holds the report.
    Invalid = 4,
    /// Evaluation failed (unbound name, kind mismatch).
    Eval = 5,
    /// A constraint was violated at some sample.
    Violated = 6,
    /// The requested unit does not exist.
    UnknownUnit = 7,
    /// Widget compilation failed.
    Compile = 8,
    /// An argument was out of range.
    BadArgument = 9,
    /// The library panicked; the handle arguments should be considered poisoned.
    Panic = 10,
}

/// Kind of an evaluated expression result.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocspecKind {
    Number = 0,
    Boolean = 1,
}

/// A parsed and validated DocSpec.
pub struct DocspecSpec {
    spec: DocSpec,
}

/// A parsed expression.
pub struct DocspecExpr {
    expr: Expr,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("interior nul removed"));
}

fn fail(status: DocspecStatus, msg: impl Into<String>) -> DocspecStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> DocspecStatus) -> DocspecStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            fail(DocspecStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, DocspecStatus> {
    if p.is_null() {
        return Err(fail(DocspecStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(DocspecStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> DocspecStatus {
    let c = CString::new(s.replace('\0', "\u{fffd}")).expect("interior nul removed");
    *out = c.into_raw();
    DocspecStatus::Ok
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(DocspecStatus::NullArgument, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn docspec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread. Empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn docspec_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn docspec_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a DocSpec JSON document.
///
/// Returns `Parse` for malformed or structurally wrong input and `Invalid`
/// for semantic violations; in both cases the last error is the JSON report.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn docspec_spec_parse(json: *const c_char, out: *mut *mut DocspecSpec) -> DocspecStatus {
    guard(|| {
        non_null!(out);
        *out = ptr::null_mut();
        let text = tri!(str_arg(json, "json"));
        let spec = match decode(text) {
            Ok(s) => s,
            Err(report) => return fail(DocspecStatus::Parse, report_json(&report)),
        };
        let report = validate_docspec(&spec);
        if !report.is_empty() {
            return fail(DocspecStatus::Invalid, report_json(&report));
        }
        *out = Box::into_raw(Box::new(DocspecSpec { spec }));
        DocspecStatus::Ok
    })
}

/// JSON syntax plus structural decoding, without the semantic checks.
fn decode(text: &str) -> Result<DocSpec, ValidationReport> {
    let json: serde_json::Value = serde_json::from_str(text).map_err(|e| {
        let mut r = ValidationReport::new();
        r.add(ViolationKind::Syntax, "", format!("malformed document: {e}"));
        r
    })?;
    docspec_from_json(&json)
}

fn report_json(report: &ValidationReport) -> String {
    serde_json::to_string(report).expect("report serializes")
}

/// Validates a DocSpec JSON document and writes the report (a JSON array,
/// empty when valid) to `report_out`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `report_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn docspec_validate(json: *const c_char, report_out: *mut *mut c_char) -> DocspecStatus {
    guard(|| {
        non_null!(report_out);
        *report_out = ptr::null_mut();
        let text = tri!(str_arg(json, "json"));
        let (status, report) = match decode(text) {
            Err(r) => (DocspecStatus::Parse, r),
            Ok(spec) => {
                let r = validate_docspec(&spec);
                (if r.is_empty() { DocspecStatus::Ok } else { DocspecStatus::Invalid }, r)
            }
        };
        let body = report_json(&report);
        put_string(report_out, body.clone());
        if status != DocspecStatus::Ok {
            set_error(body);
        }
        status
    })
}

/// Releases a spec handle. Null is ignored.
///
/// # Safety
/// `spec` must come from [`docspec_spec_parse`] and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn docspec_spec_free(spec: *mut DocspecSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Number of knowledge units, or 0 for a null handle.
///
/// # Safety
/// `spec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn docspec_spec_unit_count(spec: *const DocspecSpec) -> usize {
    spec.as_ref().map_or(0, |s| s.spec.units.len())
}

/// Canonical JSON serialization of the spec.
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn docspec_spec_to_json(spec: *const DocspecSpec, out: *mut *mut c_char) -> DocspecStatus {
    guard(|| {
        non_null!(spec, out);
        put_string(out, serialize_docspec(&(*spec).spec))
    })
}

/// Sweeps every unit's constraint and writes `[{"unit", "report"}, ...]` to
/// `out`. Returns `Violated` when any unit has a violating sample; the
/// reports are written either way.
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn docspec_spec_verify(
    spec: *const DocspecSpec,
    grid_points: usize,
    cap: usize,
    out: *mut *mut c_char,
) -> DocspecStatus {
    guard(|| {
        non_null!(spec, out);
        *out = ptr::null_mut();
        if cap == 0 {
            return fail(DocspecStatus::BadArgument, "cap must be at least 1");
        }
        let mut reports = Vec::new();
        let mut violated = Vec::new();
        for unit in &(*spec).spec.units {
            let plan = plan_sweep(&unit.interaction, grid_points, cap);
            let report = match verify_constraint(&unit.interaction, &plan) {
                Ok(r) => r,
                Err(e) => return fail(DocspecStatus::Eval, format!("unit {}: {e}", unit.id)),
            };
            if report.status == VerificationStatus::Violated {
                violated.push(unit.id.clone());
            }
            reports.push(json!({"unit": unit.id, "report": report}));
        }
        put_string(out, serde_json::to_string(&reports).expect("reports serialize"));
        if violated.is_empty() {
            DocspecStatus::Ok
        } else {
            fail(DocspecStatus::Violated, format!("constraint violated in {}", violated.join(", ")))
        }
    })
}

/// Compiles the widget for `unit_id` into a self-contained HTML fragment
/// whose root element has id `container_id`.
///
/// # Safety
/// `spec` must be a live handle; the strings must be NUL-terminated; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn docspec_compile_widget(
    spec: *const DocspecSpec,
    unit_id: *const c_char,
    container_id: *const c_char,
    out: *mut *mut c_char,
) -> DocspecStatus {
    guard(|| {
        non_null!(spec, out);
        *out = ptr::null_mut();
        let id = tri!(str_arg(unit_id, "unit_id"));
        let container = tri!(str_arg(container_id, "container_id"));
        let Some(unit) = (*spec).spec.unit(id) else {
            return fail(DocspecStatus::UnknownUnit, format!("unknown unit '{id}'"));
        };
        match compile_widget(&unit.interaction, container) {
            Ok(w) => put_string(out, w.html),
            Err(e) => fail(DocspecStatus::Compile, e.to_string()),
        }
    })
}

/// Parses an expression.
///
/// # Safety
/// `src` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn docspec_expr_parse(src: *const c_char, out: *mut *mut DocspecExpr) -> DocspecStatus {
    guard(|| {
        non_null!(out);
        *out = ptr::null_mut();
        let text = tri!(str_arg(src, "src"));
        match parse_expr(text) {
            Ok(expr) => {
                *out = Box::into_raw(Box::new(DocspecExpr { expr }));
                DocspecStatus::Ok
            }
            Err(e) => fail(DocspecStatus::Parse, e.to_string()),
        }
    })
}

/// Releases an expression handle. Null is ignored.
///
/// # Safety
/// `expr` must come from [`docspec_expr_parse`] and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn docspec_expr_free(expr: *mut DocspecExpr) {
    if !expr.is_null() {
        drop(Box::from_raw(expr));
    }
}

/// Canonical text of the expression.
///
/// # Safety
/// `expr` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn docspec_expr_format(expr: *const DocspecExpr, out: *mut *mut c_char) -> DocspecStatus {
    guard(|| {
        non_null!(expr, out);
        put_string(out, format_expr(&(*expr).expr))
    })
}

/// Evaluates the expression with `count` numeric bindings. Booleans come
/// back as 1.0 or 0.0 with `out_kind` set to `Boolean`.
///
/// # Safety
/// `expr` must be a live handle. `names` and `values` must each point to
/// `count` elements (either may be null when `count` is 0). `out_value`
/// and `out_kind` must be writable.
#[no_mangle]
pub unsafe extern "C" fn docspec_expr_eval(
    expr: *const DocspecExpr,
    names: *const *const c_char,
    values: *const f64,
    count: usize,
    out_value: *mut f64,
    out_kind: *mut DocspecKind,
) -> DocspecStatus {
    guard(|| {
        non_null!(expr, out_value, out_kind);
        if count > 0 {
            non_null!(names, values);
        }
        let mut env = Env::new();
        for i in 0..count {
            let name = tri!(str_arg(*names.add(i), "binding name"));
            if let Err(e) = env.bind(name, *values.add(i)) {
                return fail(DocspecStatus::BadArgument, e.to_string());
            }
        }
        match eval_expr(&(*expr).expr, &env) {
            Ok(Value::Num(v)) => {
                *out_value = v;
                *out_kind = DocspecKind::Number;
                DocspecStatus::Ok
            }
            Ok(Value::Bool(b)) => {
                *out_value = if b { 1.0 } else { 0.0 };
                *out_kind = DocspecKind::Boolean;
                DocspecStatus::Ok
            }
            Err(e) => fail(DocspecStatus::Eval, e.to_string()),
        }
    })
}

/// Nonzero when `status` is `Ok`. Convenience for bindings without enums.
#[no_mangle]
pub extern "C" fn docspec_status_ok(status: DocspecStatus) -> c_int {
    c_int::from(status == DocspecStatus::Ok)
}
