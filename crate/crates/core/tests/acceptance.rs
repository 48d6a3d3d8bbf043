//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use docspec::cli::{self, Io, EXIT_FAILURE, EXIT_OK};
use docspec::expr::{dependency_order, eval_expr, format_expr, parse_expr, DerivedNode, Env, Value};
use docspec::pipeline::{
    compare, evaluate, execute, execute_unit_text, execute_unit_widget, plan, slug, PipelineConfig, PipelineError,
    Providers, ScriptedProvider, Stage, UnitStatus, Verdict, WidgetMode, DOCSPEC_FILE, DOCUMENT_FILE,
    VERIFICATION_FILE,
};
use docspec::verify::{plan_sweep, Resolved, DEFAULT_CAP, DEFAULT_GRID_POINTS};
use docspec::widget::{compile_widget, validate_widget_contract};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value as Json};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

#[allow(clippy::approx_constant)]
const PI_5_DIGITS: f64 = 3.14159;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if $cond {
        } else {
            return Err(format!($($msg)*));
        }
    };
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["docspec"];
    argv.extend_from_slice(args);
    let code = cli::run(
        argv,
        &mut Io {
            out: &mut out,
            err: &mut err,
        },
    );
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

// criterion 1

/// 2·π·1.5, computed independently with mpmath and frozen.
const CIRCUMFERENCE_AT_1_5: f64 = 9.42477796076938;

fn pi_fixture() -> Outcome {
    let start = Instant::now();
    let path = spec_path("pi");
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut io = Io {
        out: &mut out,
        err: &mut err,
    };
    let code = cli::cmd_validate(&path, false, false, &mut io);
    ensure!(code == EXIT_OK, "cmd_validate exited {code}");
    let code = cli::cmd_verify(&path, DEFAULT_GRID_POINTS, DEFAULT_CAP, false, &mut io);
    let text = String::from_utf8(out).unwrap();
    ensure!(code == EXIT_OK, "cmd_verify exited {code}: {text}");
    ensure!(text.contains("pi-ratio: verified"), "unexpected verify output: {text}");

    let spec = load_spec(&path);
    let interaction = &spec.units[0].interaction;
    let sweep = plan_sweep(interaction, DEFAULT_GRID_POINTS, DEFAULT_CAP);
    let rs: Vec<f64> = sweep.axis("r").unwrap().samples.iter().map(|v| v.as_num().unwrap()).collect();
    ensure!(rs.len() >= 11, "only {} samples", rs.len());
    for must in [0.5, 5.0, 1.0] {
        ensure!(rs.contains(&must), "sample grid {rs:?} misses {must}");
    }
    ensure!(rs.iter().all(|r| (0.5..=5.0).contains(r)), "sample outside [0.5, 5]");
    let resolved = Resolved::new(interaction).map_err(|r| r.to_string())?;
    let mut worst: f64 = 0.0;
    for env in sweep.samples() {
        let state = resolved.evaluate(&env).map_err(|e| e.to_string())?;
        let ratio = state.env.get("ratio").and_then(Value::as_num).unwrap();
        let r = env.get("r").and_then(Value::as_num).unwrap();
        let oracle = (2.0 * std::f64::consts::PI * r) / (2.0 * r);
        ensure!((ratio - oracle).abs() <= 1e-12, "ratio {ratio} disagrees with oracle {oracle} at r={r}");
        worst = worst.max((ratio - PI_5_DIGITS).abs());
    }
    ensure!(worst <= 1e-3, "max |ratio - 3.14159| = {worst}");
    let c = resolved
        .evaluate(&Env::new().with("r", 1.5))
        .map_err(|e| e.to_string())?
        .env
        .get("C")
        .and_then(Value::as_num)
        .unwrap();
    ensure!((c - CIRCUMFERENCE_AT_1_5).abs() <= 1e-12, "C(1.5) = {c}");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("{} samples, max deviation {worst:.2e}, {elapsed:.0?}", rs.len()))
}

// criterion 2: independent expression model and interpreter

#[derive(Debug, Clone, Copy, PartialEq)]
enum OVal {
    N(f64),
    B(bool),
}

#[derive(Debug, Clone)]
enum O {
    Num(f64),
    Bool(bool),
    Pi,
    E,
    Var(&'static str),
    Neg(Box<O>),
    Not(Box<O>),
    Bin(&'static str, Box<O>, Box<O>),
    Call(&'static str, Vec<O>),
}

const VARS: [&str; 3] = ["x", "y", "z"];
const ARITH: [&str; 5] = ["+", "-", "*", "/", "^"];
const CMP: [&str; 6] = ["<", "<=", ">", ">=", "==", "!="];
const UNARY_FUNCS: [&str; 9] = ["sin", "cos", "tan", "sqrt", "abs", "exp", "log", "floor", "round"];

fn gen_num(rng: &mut StdRng, depth: u32) -> O {
    if depth == 0 || rng.random_bool(0.2) {
        return match rng.random_range(0..6) {
            0 => O::Num([0.0, 1.0, 2.0, 3.0, 0.5, 0.1, 10.0, 1e-7, 123.456, 1e6][rng.random_range(0..10)]),
            1 => O::Num((rng.random_range(0.0..100.0f64) * 1000.0).round() / 1000.0),
            2 => O::Pi,
            3 => O::E,
            _ => O::Var(VARS[rng.random_range(0..3)]),
        };
    }
    let d = depth - 1;
    match rng.random_range(0..10) {
        0 => O::Neg(Box::new(gen_num(rng, d))),
        1..=5 => O::Bin(
            ARITH[rng.random_range(0..ARITH.len())],
            Box::new(gen_num(rng, d)),
            Box::new(gen_num(rng, d)),
        ),
        6 => O::Call(
            ["min", "max"][rng.random_range(0..2)],
            vec![gen_num(rng, d), gen_num(rng, d)],
        ),
        _ => O::Call(UNARY_FUNCS[rng.random_range(0..UNARY_FUNCS.len())], vec![gen_num(rng, d)]),
    }
}

fn gen_bool(rng: &mut StdRng, depth: u32) -> O {
    if depth == 0 || rng.random_bool(0.15) {
        return O::Bool(rng.random_bool(0.5));
    }
    let d = depth - 1;
    match rng.random_range(0..8) {
        0 => O::Not(Box::new(gen_bool(rng, d))),
        1 | 2 => O::Bin(
            ["and", "or"][rng.random_range(0..2)],
            Box::new(gen_bool(rng, d)),
            Box::new(gen_bool(rng, d)),
        ),
        3 => O::Bin(
            ["==", "!="][rng.random_range(0..2)],
            Box::new(gen_bool(rng, d)),
            Box::new(gen_bool(rng, d)),
        ),
        _ => O::Bin(
            CMP[rng.random_range(0..CMP.len())],
            Box::new(gen_num(rng, d)),
            Box::new(gen_num(rng, d)),
        ),
    }
}

fn o_depth(e: &O) -> u32 {
    match e {
        O::Neg(a) | O::Not(a) => 1 + o_depth(a),
        O::Bin(_, a, b) => 1 + o_depth(a).max(o_depth(b)),
        O::Call(_, args) => 1 + args.iter().map(o_depth).max().unwrap_or(0),
        _ => 0,
    }
}

fn o_text(e: &O) -> String {
    match e {
        O::Num(v) => format!("{v}"),
        O::Bool(b) => b.to_string(),
        O::Pi => "pi".into(),
        O::E => "e".into(),
        O::Var(v) => (*v).into(),
        O::Neg(a) => format!("(-{})", o_text(a)),
        O::Not(a) => format!("(not {})", o_text(a)),
        O::Bin(op, a, b) => format!("({} {op} {})", o_text(a), o_text(b)),
        O::Call(f, args) => format!("{f}({})", args.iter().map(o_text).collect::<Vec<_>>().join(", ")),
    }
}

fn o_min(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a == b {
        if a.is_sign_negative() { a } else { b }
    } else if a < b {
        a
    } else {
        b
    }
}

fn o_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a == b {
        if a.is_sign_positive() { a } else { b }
    } else if a > b {
        a
    } else {
        b
    }
}

fn o_eval(e: &O, vars: &BTreeMap<&str, f64>) -> OVal {
    let n = |e: &O| match o_eval(e, vars) {
        OVal::N(v) => v,
        OVal::B(_) => panic!("ill-typed oracle tree"),
    };
    let b = |e: &O| match o_eval(e, vars) {
        OVal::B(v) => v,
        OVal::N(_) => panic!("ill-typed oracle tree"),
    };
    match e {
        O::Num(v) => OVal::N(*v),
        O::Bool(v) => OVal::B(*v),
        O::Pi => OVal::N(std::f64::consts::PI),
        O::E => OVal::N(std::f64::consts::E),
        O::Var(v) => OVal::N(vars[v]),
        O::Neg(a) => OVal::N(-n(a)),
        O::Not(a) => OVal::B(!b(a)),
        O::Bin(op, l, r) => match *op {
            "and" => OVal::B(b(l) && b(r)),
            "or" => OVal::B(b(l) || b(r)),
            "==" | "!=" => {
                let eq = match (o_eval(l, vars), o_eval(r, vars)) {
                    (OVal::N(x), OVal::N(y)) => x == y,
                    (OVal::B(x), OVal::B(y)) => x == y,
                    _ => panic!("ill-typed oracle tree"),
                };
                OVal::B(if *op == "==" { eq } else { !eq })
            }
            "<" => OVal::B(n(l) < n(r)),
            "<=" => OVal::B(n(l) <= n(r)),
            ">" => OVal::B(n(l) > n(r)),
            ">=" => OVal::B(n(l) >= n(r)),
            "+" => OVal::N(n(l) + n(r)),
            "-" => OVal::N(n(l) - n(r)),
            "*" => OVal::N(n(l) * n(r)),
            "/" => OVal::N(n(l) / n(r)),
            "^" => OVal::N(n(l).powf(n(r))),
            other => panic!("unknown operator {other}"),
        },
        O::Call(f, args) => {
            let x = n(&args[0]);
            OVal::N(match *f {
                "min" => o_min(x, n(&args[1])),
                "max" => o_max(x, n(&args[1])),
                "sin" => x.sin(),
                "cos" => x.cos(),
                "tan" => x.tan(),
                "sqrt" => x.sqrt(),
                "abs" => x.abs(),
                "exp" => x.exp(),
                "log" => x.ln(),
                "floor" => x.floor(),
                "round" => {
                    let t = x.abs().floor();
                    let r = if x.abs() - t >= 0.5 { t + 1.0 } else { t };
                    r.copysign(x)
                }
                other => panic!("unknown function {other}"),
            })
        }
    }
}

fn numbers_agree(a: f64, b: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn random_expressions() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed_0002);
    let (mut finite, mut nan, mut inf, mut boolean) = (0, 0, 0, 0);
    for i in 0..1000 {
        let max_depth = rng.random_range(0..=6);
        let tree = if rng.random_bool(0.3) {
            gen_bool(&mut rng, max_depth)
        } else {
            gen_num(&mut rng, max_depth)
        };
        ensure!(o_depth(&tree) <= 6, "generator exceeded depth 6");
        let mut vars = BTreeMap::new();
        let mut env = Env::new();
        for v in VARS {
            let x = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(-10.0..10.0) };
            vars.insert(v, x);
            env = env.with(v, x);
        }
        let src = o_text(&tree);
        let parsed = parse_expr(&src).map_err(|e| format!("#{i} `{src}`: {e}"))?;
        let formatted = format_expr(&parsed);
        let reparsed = parse_expr(&formatted).map_err(|e| format!("#{i} `{formatted}`: {e}"))?;
        ensure!(reparsed == parsed, "#{i} round trip changed the tree: `{src}` -> `{formatted}`");
        ensure!(format_expr(&reparsed) == formatted, "#{i} formatting is not a fixed point");

        let expected = o_eval(&tree, &vars);
        for (label, e) in [("parsed", &parsed), ("reparsed", &reparsed)] {
            let got = eval_expr(e, &env).map_err(|err| format!("#{i} `{src}` {label}: {err}"))?;
            let ok = match (got, expected) {
                (Value::Num(a), OVal::N(b)) => numbers_agree(a, b),
                (Value::Bool(a), OVal::B(b)) => a == b,
                _ => false,
            };
            ensure!(ok, "#{i} `{src}` {label}: got {got:?}, oracle {expected:?}");
        }
        match expected {
            OVal::N(v) if v.is_nan() => nan += 1,
            OVal::N(v) if v.is_infinite() => inf += 1,
            OVal::N(_) => finite += 1,
            OVal::B(_) => boolean += 1,
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "1000 expressions ({finite} finite, {nan} NaN, {inf} infinite, {boolean} boolean), {elapsed:.0?}"
    ))
}

// criterion 3

fn reaches(adj: &[Vec<usize>], from: usize, target: usize, visited: &mut Vec<usize>) -> bool {
    for &next in &adj[from] {
        if next == target {
            return true;
        }
        if !visited.contains(&next) {
            visited.push(next);
            if reaches(adj, next, target, visited) {
                return true;
            }
            visited.pop();
        }
    }
    false
}

fn dependency_graphs() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed_0003);
    let (mut cyclic, mut acyclic) = (0, 0);
    for g in 0..500 {
        let n = rng.random_range(1..=8);
        let mut names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        for i in (1..n).rev() {
            names.swap(i, rng.random_range(0..=i));
        }
        let density = rng.random_range(0.05..0.45);
        let mut nodes = Vec::new();
        for name in &names {
            let mut refs: Vec<String> = names
                .iter()
                .filter(|other| {
                    let p = if *other == name { density / 8.0 } else { density };
                    rng.random_bool(p)
                })
                .cloned()
                .collect();
            if rng.random_bool(0.3) {
                refs.push("input".into());
            }
            nodes.push(DerivedNode::new(name.clone(), refs));
        }
        let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let adj: Vec<Vec<usize>> = nodes
            .iter()
            .map(|nd| nd.refs.iter().filter_map(|r| index.get(r.as_str()).copied()).collect())
            .collect();
        let has_cycle = (0..n).any(|s| reaches(&adj, s, s, &mut vec![s]));

        match dependency_order(&nodes) {
            Ok(order) => {
                ensure!(!has_cycle, "graph {g}: cycle missed in {nodes:?}");
                let mut sorted = order.clone();
                sorted.sort();
                let mut expected = names.clone();
                expected.sort();
                ensure!(sorted == expected, "graph {g}: order {order:?} is not a permutation");
                let pos: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
                for nd in &nodes {
                    for r in &nd.refs {
                        if let Some(&rp) = pos.get(r.as_str()) {
                            ensure!(rp < pos[nd.name.as_str()], "graph {g}: {r} must precede {}", nd.name);
                        }
                    }
                }
                acyclic += 1;
            }
            Err(cycle) => {
                ensure!(has_cycle, "graph {g}: spurious cycle {:?}", cycle.path);
                let path = &cycle.path;
                ensure!(path.len() >= 2 && path.first() == path.last(), "graph {g}: malformed cycle {path:?}");
                let edge = |a: &str, b: &str| nodes[index[a]].refs.contains(b);
                let forward = path.windows(2).all(|w| edge(&w[0], &w[1]));
                let backward = path.windows(2).all(|w| edge(&w[1], &w[0]));
                ensure!(forward || backward, "graph {g}: {path:?} is not a cycle of the graph");
                cyclic += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("500 graphs ({cyclic} cyclic, {acyclic} acyclic), {elapsed:.0?}"))
}

// criterion 4

fn widget_corpus() -> Outcome {
    let specs = corpus();
    ensure!(specs.len() >= 10, "corpus has only {} specs", specs.len());
    let mut kinds = BTreeSet::new();
    let mut units = 0;
    for (file, spec) in &specs {
        for unit in &spec.units {
            let i = &unit.interaction;
            if i.is_static() {
                kinds.insert("static");
            }
            for v in i.controllables() {
                kinds.insert(v.control.kind_name());
            }
            let a = compile_widget(i, "w-1").map_err(|e| format!("{file}/{}: {e}", unit.id))?;
            let b = compile_widget(i, "w-1").map_err(|e| format!("{file}/{}: {e}", unit.id))?;
            ensure!(a.html == b.html, "{file}/{}: compile output differs between runs", unit.id);
            let report = validate_widget_contract(&a.html, i);
            ensure!(report.is_empty(), "{file}/{}: {report}", unit.id);
            units += 1;
        }
    }
    for k in ["slider", "toggle", "dropdown", "drag", "static"] {
        ensure!(kinds.contains(k), "corpus lacks a {k} case");
    }
    Ok(format!("{} specs, {units} units, kinds {kinds:?}", specs.len()))
}

// criterion 5

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn check_audit(p: &ScriptedProvider, stage: Stage, key: &str, n: usize, calls: usize) -> Result<(), String> {
    let audit: Vec<_> = p.audit().into_iter().filter(|a| a.stage == stage && a.key == key).collect();
    ensure!(audit.len() == calls, "{stage:?} n={n}: {} audited calls, expected {calls}", audit.len());
    for (i, a) in audit.iter().enumerate() {
        ensure!(a.attempt == i + 1, "{stage:?} n={n}: audit attempt {} at position {i}", a.attempt);
        ensure!(a.faulted == (a.attempt <= n), "{stage:?} n={n}: fault flag wrong on attempt {}", a.attempt);
    }
    Ok(())
}

fn retry_contract() -> Outcome {
    let k = 3;
    let config = PipelineConfig::default();
    ensure!(config.max_attempts == k, "default k is {}", config.max_attempts);
    let fx = scripted("pi");
    let spec = load_spec(&spec_path("pi"));
    let unit = &spec.units[0];
    let text = read(&fx.join("text/pi-ratio.html"));
    let widget = read(&fx.join("widget/pi-ratio.html"));
    let plan_reply = read(&fx.join(format!("plan/{}.json", slug(PI_TOPIC))));
    let compiled = compile_widget(&unit.interaction, "w-1").unwrap().html;

    for n in 0..=5 {
        let faults = 1..=n;
        let expect_ok = n < k;
        let calls = (n + 1).min(k);

        let tp = ScriptedProvider::new()
            .with(Stage::Text, &unit.id, text.clone())
            .with_faults(Stage::Text, &unit.id, faults.clone());
        match execute_unit_text(&spec.topic, unit, "", &tp, &config) {
            Ok(o) => {
                ensure!(expect_ok, "text n={n}: succeeded but k={k}");
                ensure!(o.attempts == calls, "text n={n}: {} attempts", o.attempts);
                ensure!(o.fragment.trim() == text.trim(), "text n={n}: unexpected fragment");
            }
            Err(PipelineError::StageFailed { attempts, .. }) => {
                ensure!(!expect_ok, "text n={n}: failed but n < k");
                ensure!(attempts == k, "text n={n}: failure after {attempts} attempts");
            }
            Err(e) => return Err(format!("text n={n}: {e}")),
        }
        check_audit(&tp, Stage::Text, &unit.id, n, calls)?;

        let wp = ScriptedProvider::new()
            .with(Stage::Widget, &unit.id, widget.clone())
            .with_faults(Stage::Widget, &unit.id, faults.clone());
        let o = execute_unit_widget(unit, &wp, &config, WidgetMode::Llm, "w-1").map_err(|e| format!("widget n={n}: {e}"))?;
        ensure!(o.attempts == calls, "widget n={n}: {} attempts", o.attempts);
        ensure!(o.fallback == !expect_ok, "widget n={n}: fallback flag {}", o.fallback);
        let expected = if expect_ok { &widget } else { &compiled };
        ensure!(o.fragment.trim() == expected.trim(), "widget n={n}: unexpected fragment");
        check_audit(&wp, Stage::Widget, &unit.id, n, calls)?;

        let key = slug(PI_TOPIC);
        let pp = ScriptedProvider::new()
            .with(Stage::Plan, &key, plan_reply.clone())
            .with_faults(Stage::Plan, &key, faults);
        match plan(PI_TOPIC, &pp, &config) {
            Ok(o) => {
                ensure!(expect_ok, "plan n={n}: succeeded but k={k}");
                ensure!(o.attempts == calls, "plan n={n}: {} attempts", o.attempts);
            }
            Err(PipelineError::PlanFailed { attempts, .. }) => {
                ensure!(!expect_ok, "plan n={n}: failed but n < k");
                ensure!(attempts == k, "plan n={n}: failure after {attempts} attempts");
            }
            Err(e) => return Err(format!("plan n={n}: {e}")),
        }
        check_audit(&pp, Stage::Plan, &key, n, calls)?;
    }
    Ok(format!("plan, text and widget stages for n = 0..=5 with k = {k}"))
}

// criterion 6

fn section_ids(html: &str) -> Vec<String> {
    html.match_indices("<section ")
        .filter_map(|(i, _)| {
            let tag = &html[i..i + html[i..].find('>')?];
            let at = tag.find("data-unit=\"")? + 11;
            Some(tag[at..at + tag[at..].find('"')?].to_string())
        })
        .collect()
}

fn verdict_in(dir: &Path) -> Result<String, String> {
    let text = std::fs::read_to_string(dir.join("evaluation.json")).map_err(|e| e.to_string())?;
    let v: Json = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    Ok(v["verdict"].as_str().unwrap_or("").to_string())
}

fn scripted_runs() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let fx = scripted("matrix-rank");
    let spec = load_spec(&spec_path("matrix_rank"));
    ensure!(spec.units.len() == 3, "expected a 3-unit spec");
    let unit_order: Vec<String> = spec.units.iter().map(|u| u.id.clone()).collect();

    let mut docs = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        let (code, out, err) = run_cli(&["run", RANK_TOPIC, "--fixtures", p(&fx), "-o", p(&dir)]);
        ensure!(code == EXIT_OK, "run {run} exited {code}: {out}{err}");
        ensure!(verdict_in(&dir)? == "pass", "clean run {run} did not pass");
        docs.push(std::fs::read(dir.join(DOCUMENT_FILE)).unwrap());
    }
    ensure!(docs[0] == docs[1], "documents differ between runs");
    let order = section_ids(&String::from_utf8(docs[0].clone()).unwrap());
    ensure!(order == unit_order, "section order {order:?} != unit order {unit_order:?}");

    let violated = tmp.path().join("violated");
    let (code, _, _) = run_cli(&[
        "run",
        "--spec",
        p(&fixtures().join("violated/pi_ratio_3.docspec.json")),
        "--fixtures",
        p(&scripted("pi")),
        "-o",
        p(&violated),
    ]);
    ensure!(code == EXIT_FAILURE, "planted violation exited {code}");
    ensure!(verdict_in(&violated)? == "fail", "planted violation did not fail");

    let exhausted = tmp.path().join("exhausted");
    let (code, out, err) =
        run_cli(&["run", RANK_TOPIC, "--fixtures", p(&scripted("text-exhausted")), "-o", p(&exhausted)]);
    ensure!(code == EXIT_FAILURE, "unit failure exited {code}");
    ensure!(err.contains("rank-drop"), "unit failure does not name the unit: {out}{err}");
    ensure!(verdict_in(&exhausted).map_or(true, |v| v != "pass"), "unit failure produced a pass");

    let provider = Arc::new(ScriptedProvider::from_dir(&fx).unwrap());
    let providers = Providers::uniform(provider.clone());
    let config = PipelineConfig::default();
    let exec = execute(&spec, &providers, &config).map_err(|e| e.to_string())?;
    let clean = evaluate(&exec.document, &exec.units, &spec, provider.as_ref(), &config);
    ensure!(clean.verdict == Verdict::Pass, "clean evaluation failed");
    let mut units = exec.units.clone();
    units[1].status = UnitStatus::Failed;
    units[1].failure_reasons.push("planted failure".into());
    let failed = evaluate(&exec.document, &units, &spec, provider.as_ref(), &config);
    ensure!(failed.verdict == Verdict::Fail, "a failed unit still passed");
    Ok(format!("identical documents, order {order:?}, verdicts pass/fail/fail/fail"))
}

// criterion 7

fn comparison() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let provider = Arc::new(ScriptedProvider::from_dir(&scripted("pi")).unwrap());
    let providers = Providers::uniform(provider.clone());
    let summary =
        compare(PI_TOPIC, &providers, &PipelineConfig::default(), tmp.path()).map_err(|e| e.to_string())?;
    let naive_calls = provider.audit().iter().filter(|a| a.stage == Stage::Naive).count();
    ensure!(naive_calls == 1, "naive arm made {naive_calls} calls");
    ensure!(summary.naive.provider_calls == 1, "naive summary reports {} calls", summary.naive.provider_calls);
    ensure!(!summary.naive.has_docspec, "naive arm claims a docspec");
    let naive_files: Vec<_> = std::fs::read_dir(tmp.path().join("naive"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    ensure!(naive_files == [DOCUMENT_FILE], "naive arm wrote {naive_files:?}");
    ensure!(summary.pipeline.has_docspec, "pipeline arm lacks a docspec");
    let pipe = tmp.path().join("pipeline");
    for f in [DOCUMENT_FILE, DOCSPEC_FILE, VERIFICATION_FILE] {
        ensure!(pipe.join(f).is_file(), "pipeline arm is missing {f}");
    }
    let reports: Json = serde_json::from_str(&read(&pipe.join(VERIFICATION_FILE))).map_err(|e| e.to_string())?;
    ensure!(
        reports == json!([{"unit": "pi-ratio", "report": reports[0]["report"].clone()}])
            && reports[0]["report"]["status"] == "verified",
        "unexpected verification reports {reports}"
    );
    Ok(format!("naive: 1 call, no docspec; pipeline: {} calls, docspec and verification", summary.pipeline.provider_calls))
}

// criterion 8

struct Server {
    child: Child,
    base: String,
    http: reqwest::blocking::Client,
}

impl Server {
    fn start(data: &Path) -> Result<Server, String> {
        let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let addr = format!("127.0.0.1:{port}");
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_docspec"));
        for var in ["DOCSPEC_FIXTURES", "DOCSPEC_PROVIDER_URL", "DOCSPEC_ADDR", "DOCSPEC_DATA_DIR"] {
            cmd.env_remove(var);
        }
        let child = cmd
            .env("RUST_LOG", "warn")
            .args(["serve", "--addr", &addr, "--data-dir"])
            .arg(data)
            .arg("--fixtures")
            .arg(scripted("matrix-rank"))
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let server = Server {
            child,
            base: format!("http://{addr}"),
            http: reqwest::blocking::Client::new(),
        };
        let deadline = Instant::now() + Duration::from_secs(15);
        while Instant::now() < deadline {
            if server.http.get(format!("{}/health", server.base)).send().is_ok() {
                return Ok(server);
            }
            std::thread::sleep(Duration::from_millis(25));
        }
        Err("server did not come up".into())
    }

    fn call(&self, method: &str, path: &str, body: Option<&Json>, if_match: Option<&str>) -> (u16, Vec<u8>) {
        let url = format!("{}{path}", self.base);
        let mut req = match method {
            "GET" => self.http.get(url),
            "POST" => self.http.post(url),
            "PUT" => self.http.put(url),
            _ => unreachable!(),
        };
        if let Some(b) = body {
            req = req.header("content-type", "application/json").body(b.to_string());
        }
        if let Some(tag) = if_match {
            req = req.header("if-match", tag);
        }
        let resp = req.send().expect("request");
        (resp.status().as_u16(), resp.bytes().expect("body").to_vec())
    }

    fn json(&self, method: &str, path: &str, body: Option<&Json>, if_match: Option<&str>) -> (u16, Json) {
        let (s, bytes) = self.call(method, path, body, if_match);
        (s, serde_json::from_slice(&bytes).unwrap_or(Json::Null))
    }

    fn wait_job(&self, id: &str) -> Result<Json, String> {
        let deadline = Instant::now() + Duration::from_secs(30);
        loop {
            let (_, job) = self.json("GET", &format!("/sessions/{id}/job"), None, None);
            if job["status"] == "done" {
                return Ok(job);
            }
            if job["status"] == "failed" || Instant::now() > deadline {
                return Err(format!("job did not finish: {job}"));
            }
            std::thread::sleep(Duration::from_millis(10));
        }
    }

    fn snapshot(&self, id: &str) -> Vec<(String, u16, Vec<u8>)> {
        let mut paths = vec![
            format!("/sessions/{id}/revisions"),
            format!("/sessions/{id}/docspec"),
            format!("/sessions/{id}/document"),
        ];
        paths.extend((1..=3).map(|n| format!("/sessions/{id}/revisions/{n}")));
        paths
            .into_iter()
            .map(|path| {
                let (s, b) = self.call("GET", &path, None, None);
                (path, s, b)
            })
            .collect()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn durability() -> Outcome {
    let data = tempfile::tempdir().unwrap();
    let server = Server::start(data.path())?;
    let (s, created) = server.json("POST", "/sessions", Some(&json!({"topic": RANK_TOPIC})), None);
    ensure!(s == 201, "create returned {s}: {created}");
    let id = created["id"].as_str().unwrap().to_string();
    server.wait_job(&id)?;

    let edits: [(&str, Json); 2] = [
        ("/units/0/summary", json!("Columns that span a space.")),
        ("/units/2/text_description", json!("Compare the row picture with the column picture.")),
    ];
    for (i, (pointer, value)) in edits.iter().enumerate() {
        let (s, mut doc) = server.json("GET", &format!("/sessions/{id}/docspec"), None, None);
        ensure!(s == 200, "get docspec returned {s}");
        *doc.pointer_mut(pointer).unwrap() = value.clone();
        let tag = format!("\"{}\"", i + 1);
        let (s, body) = server.json("PUT", &format!("/sessions/{id}/docspec"), Some(&doc), Some(&tag));
        ensure!(s == 200, "edit {} returned {s}: {body}", i + 1);
    }
    let (s, body) = server.json("POST", &format!("/sessions/{id}/execute"), Some(&json!({})), None);
    ensure!(s == 202, "execute returned {s}: {body}");
    server.wait_job(&id)?;

    let before = server.snapshot(&id);
    for (path, status, _) in &before {
        ensure!(*status == 200, "{path} returned {status} before the restart");
    }
    let (_, revs) = server.json("GET", &format!("/sessions/{id}/revisions"), None, None);
    ensure!(revs["revisions"].as_array().map(Vec::len) == Some(3), "expected 3 revisions: {revs}");

    drop(server);
    let server = Server::start(data.path())?;
    let after = server.snapshot(&id);
    for ((path, s1, b1), (_, s2, b2)) in before.iter().zip(&after) {
        ensure!(s1 == s2 && b1 == b2, "{path} changed across the restart");
    }
    Ok(format!("3 revisions and {} document bytes identical after SIGKILL", before[2].2.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("pi fixture validates and verifies", pi_fixture),
        ("random expressions match the oracle", random_expressions),
        ("dependency ordering matches brute force", dependency_graphs),
        ("widget compilation is deterministic and contract-clean", widget_corpus),
        ("retry contract", retry_contract),
        ("scripted runs are reproducible", scripted_runs),
        ("comparison harness emits both arms", comparison),
        ("service survives a kill", durability),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} acceptance criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} acceptance criteria passed", criteria.len());
}
