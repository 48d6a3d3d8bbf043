//! Command-line entry points. Exit codes: 0 success, 1 domain failure
//! (invalid spec, violated constraint, failed pipeline verdict), 2 usage or
//! environment failure (missing file, bad flags, unbound address).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::docspec::{parse_docspec, serialize_docspec, DocSpec};
use crate::pipeline::{
    self, container_id, run_naive, run_pipeline, write_run_artifacts, PipelineConfig, PipelineError,
    ProviderSource, Providers, WidgetMode, DEFAULT_MAX_ATTEMPTS,
};
use crate::report::ValidationReport;
use crate::service::{self, ServiceConfig};
use crate::verify::{plan_sweep, verify_constraint, VerificationStatus, DEFAULT_CAP, DEFAULT_GRID_POINTS};
use crate::widget::compile_widget;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Published structural schema of `.docspec.json` files.
pub const DOCSPEC_SCHEMA: &str = include_str!("../../data/docspec.schema.json");

#[derive(Debug, Parser)]
#[command(name = "docspec", version, about = "Plan, verify and compile interactive explanatory documents")]
pub struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a .docspec.json file against every schema and semantic rule.
    Validate {
        spec: PathBuf,
        /// Print the canonical form of a valid spec.
        #[arg(long)]
        canonical: bool,
    },
    /// Sweep each unit's controllable state and check its constraint.
    Verify {
        spec: PathBuf,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Compile one unit's widget to a file.
    Compile {
        spec: PathBuf,
        unit: String,
        out: PathBuf,
        /// Container id; defaults to `{seed}-{unit position}`.
        #[arg(long)]
        container: Option<String>,
        #[arg(long, default_value = "w")]
        seed: String,
    },
    /// Plan (unless --spec is given), execute and evaluate.
    Run(RunArgs),
    /// Generate one topic with both naive and pipeline modes.
    Compare {
        topic: String,
        #[arg(long, short = 'o', default_value = "compare-out")]
        out: PathBuf,
        #[command(flatten)]
        provider: ProviderArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Run the HTTP session service.
    Serve(ServeArgs),
    /// Print the DocSpec JSON schema.
    Schema,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Samples per continuous axis (at least 3).
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid: usize,
    /// Maximum samples per constraint.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: usize,
}

#[derive(Debug, Args)]
pub struct ProviderArgs {
    /// Scripted fixture directory. Without it a provider endpoint must be
    /// configured through the environment.
    #[arg(long, env = "DOCSPEC_FIXTURES")]
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Provider calls allowed per unit and stage.
    #[arg(short = 'k', long = "attempts", default_value_t = DEFAULT_MAX_ATTEMPTS)]
    pub attempts: usize,
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Widget container id prefix.
    #[arg(long, default_value = "w")]
    pub seed: String,
    /// Generate widgets one at a time.
    #[arg(long)]
    pub serial: bool,
}

impl PipelineArgs {
    fn config(&self, widget_mode: WidgetMode) -> PipelineConfig {
        PipelineConfig {
            max_attempts: self.attempts,
            widget_mode,
            parallel_widgets: !self.serial,
            grid_points: self.sweep.grid,
            cap: self.sweep.cap,
            container_seed: self.seed.clone(),
            ..PipelineConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RunMode {
    /// Widgets from the provider, compiler fallback on exhaustion.
    Llm,
    /// Widgets compiled from the interaction spec.
    Deterministic,
    /// One provider call for the whole page, no DocSpec.
    Naive,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Topic to plan. Ignored when --spec is given.
    pub topic: Option<String>,
    /// Execute an existing spec instead of planning.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RunMode::Deterministic)]
    pub mode: RunMode,
    #[arg(long, short = 'o', default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "DOCSPEC_ADDR", default_value = service::DEFAULT_ADDR)]
    pub addr: String,
    #[arg(long, env = "DOCSPEC_DATA_DIR", default_value = "docspec-data")]
    pub data_dir: PathBuf,
    /// Allow cross-origin requests from any origin.
    #[arg(long, env = "DOCSPEC_CORS")]
    pub cors: bool,
    #[arg(long, default_value_t = service::DEFAULT_WORKERS)]
    pub workers: usize,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

/// Writers for command output; tests capture both.
pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

macro_rules! say {
    ($w:expr, $($arg:tt)*) => {{
        let _ = writeln!($w, $($arg)*);
    }};
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { io.err } else { io.out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    dispatch(cli, io)
}

pub fn dispatch(cli: Cli, io: &mut Io<'_>) -> i32 {
    let json = cli.json;
    match cli.command {
        Command::Validate { spec, canonical } => cmd_validate(&spec, canonical, json, io),
        Command::Verify { spec, sweep } => cmd_verify(&spec, sweep.grid, sweep.cap, json, io),
        Command::Compile {
            spec,
            unit,
            out,
            container,
            seed,
        } => cmd_compile(&spec, &unit, &out, container.as_deref(), &seed, io),
        Command::Run(args) => cmd_run(&args, json, io),
        Command::Compare {
            topic,
            out,
            provider,
            pipeline,
        } => cmd_compare(&topic, &out, &provider, &pipeline, json, io),
        Command::Serve(args) => cmd_serve(&args, io),
        Command::Schema => {
            let _ = io.out.write_all(DOCSPEC_SCHEMA.as_bytes());
            EXIT_OK
        }
    }
}

enum Load {
    Ok(DocSpec),
    Invalid(ValidationReport),
    Missing(String),
}

fn load_spec(path: &Path) -> Load {
    match fs::read_to_string(path) {
        Ok(text) => match parse_docspec(&text) {
            Ok(spec) => Load::Ok(spec),
            Err(r) => Load::Invalid(r),
        },
        Err(e) => Load::Missing(format!("cannot read {}: {e}", path.display())),
    }
}

fn print_report(report: &ValidationReport, json: bool, io: &mut Io<'_>) {
    if json {
        say!(io.out, "{}", json!({"valid": false, "report": report}));
    } else {
        say!(io.out, "invalid: {} violation(s)", report.len());
        for v in report.iter() {
            say!(io.out, "  {v}");
        }
    }
}

/// Loads a spec or reports why not; `Err` carries the exit code.
fn require_spec(path: &Path, json: bool, io: &mut Io<'_>) -> Result<DocSpec, i32> {
    match load_spec(path) {
        Load::Ok(spec) => Ok(spec),
        Load::Invalid(r) => {
            print_report(&r, json, io);
            Err(EXIT_FAILURE)
        }
        Load::Missing(m) => {
            say!(io.err, "error: {m}");
            Err(EXIT_USAGE)
        }
    }
}

pub fn cmd_validate(path: &Path, canonical: bool, json: bool, io: &mut Io<'_>) -> i32 {
    let spec = match require_spec(path, json, io) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if canonical {
        let _ = io.out.write_all(serialize_docspec(&spec).as_bytes());
    } else if json {
        say!(io.out, "{}", json!({"valid": true, "units": spec.units.len()}));
    } else {
        say!(io.out, "valid: {} unit(s)", spec.units.len());
    }
    EXIT_OK
}

pub fn cmd_verify(path: &Path, grid: usize, cap: usize, json: bool, io: &mut Io<'_>) -> i32 {
    let spec = match require_spec(path, json, io) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let mut code = EXIT_OK;
    let mut results = Vec::new();
    for unit in &spec.units {
        let plan = plan_sweep(&unit.interaction, grid, cap);
        let report = match verify_constraint(&unit.interaction, &plan) {
            Ok(r) => r,
            Err(e) => {
                say!(io.err, "error: unit {}: {e}", unit.id);
                return EXIT_FAILURE;
            }
        };
        if report.status == VerificationStatus::Violated {
            code = EXIT_FAILURE;
        }
        if !json {
            say!(io.out, "{}: {}", unit.id, report.summary());
            if report.truncated {
                say!(io.out, "  note: sample grid truncated to the cap of {cap}");
            }
            match report.status {
                VerificationStatus::Degenerate => {
                    say!(io.out, "  warning: no sample had finite values; the constraint was never evaluated")
                }
                VerificationStatus::Violated => {
                    let first = &report.violations[0];
                    let at: Vec<String> = first.env.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    let vals: Vec<String> = first.inputs.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    say!(
                        io.out,
                        "  first violation at {} ({}); {} of {} samples violate",
                        at.join(", "),
                        vals.join(", "),
                        report.violations.len(),
                        report.samples_checked
                    );
                }
                _ => {}
            }
        }
        results.push(json!({"unit": unit.id, "report": report}));
    }
    if json {
        say!(io.out, "{}", json!({"units": results, "passed": code == EXIT_OK}));
    }
    code
}

pub fn cmd_compile(
    path: &Path,
    unit_id: &str,
    out: &Path,
    container: Option<&str>,
    seed: &str,
    io: &mut Io<'_>,
) -> i32 {
    let spec = match require_spec(path, false, io) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let Some(index) = spec.unit_index(unit_id) else {
        let known: Vec<&str> = spec.units.iter().map(|u| u.id.as_str()).collect();
        say!(io.err, "error: unknown unit '{unit_id}' (units: {})", known.join(", "));
        return EXIT_FAILURE;
    };
    let config = PipelineConfig {
        container_seed: seed.to_string(),
        ..PipelineConfig::default()
    };
    let cid = container.map(str::to_string).unwrap_or_else(|| container_id(&config, index));
    let fragment = match compile_widget(&spec.units[index].interaction, &cid) {
        Ok(f) => f,
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_FAILURE;
        }
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        if let Err(e) = fs::create_dir_all(dir) {
            say!(io.err, "error: cannot create {}: {e}", dir.display());
            return EXIT_USAGE;
        }
    }
    if let Err(e) = fs::write(out, &fragment.html) {
        say!(io.err, "error: cannot write {}: {e}", out.display());
        return EXIT_USAGE;
    }
    say!(io.out, "wrote {} ({} bytes, container {cid})", out.display(), fragment.html.len());
    EXIT_OK
}

fn providers(args: &ProviderArgs, io: &mut Io<'_>) -> Result<Providers, i32> {
    let source = ProviderSource::resolve(args.fixtures.clone()).map_err(|e| {
        say!(io.err, "error: {e}");
        EXIT_USAGE
    })?;
    let p = source.make().map_err(|e| {
        say!(io.err, "error: {e}");
        EXIT_USAGE
    })?;
    Ok(Providers::uniform(p))
}

fn pipeline_failure(e: &PipelineError, json: bool, io: &mut Io<'_>) -> i32 {
    let code = match e {
        PipelineError::Provider { .. } | PipelineError::Config(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    };
    if json {
        say!(io.out, "{}", e.to_json());
    } else {
        say!(io.err, "error: {e}");
        say!(io.err, "{}", serde_json::to_string_pretty(&e.to_json()).expect("error serializes"));
    }
    code
}

pub fn cmd_run(args: &RunArgs, json: bool, io: &mut Io<'_>) -> i32 {
    let spec = match &args.spec {
        Some(p) => match require_spec(p, json, io) {
            Ok(s) => Some(s),
            Err(code) => return code,
        },
        None => None,
    };
    let topic = args.topic.as_deref().map(str::trim).filter(|t| !t.is_empty());
    if spec.is_none() && topic.is_none() {
        say!(io.err, "error: give a topic or --spec");
        return EXIT_USAGE;
    }
    let widget_mode = match args.mode {
        RunMode::Llm => WidgetMode::Llm,
        _ => WidgetMode::Deterministic,
    };
    let config = args.pipeline.config(widget_mode);
    if let Err(e) = config.check() {
        say!(io.err, "error: {e}");
        return EXIT_USAGE;
    }
    let providers = match providers(&args.provider, io) {
        Ok(p) => p,
        Err(code) => return code,
    };
    if let Err(e) = fs::create_dir_all(&args.out) {
        say!(io.err, "error: cannot create {}: {e}", args.out.display());
        return EXIT_USAGE;
    }

    if args.mode == RunMode::Naive {
        let topic = topic.map(str::to_string).or_else(|| spec.as_ref().map(|s| s.topic.clone()));
        let topic = topic.expect("topic or spec checked above");
        return match run_naive(&topic, providers.naive.as_ref(), &config) {
            Ok(n) => {
                let path = args.out.join(pipeline::DOCUMENT_FILE);
                if let Err(e) = fs::write(&path, &n.document.html) {
                    say!(io.err, "error: cannot write {}: {e}", path.display());
                    return EXIT_USAGE;
                }
                if json {
                    say!(io.out, "{}", json!({"mode": "naive", "attempts": n.attempts, "files": [path]}));
                } else {
                    say!(io.out, "naive document after {} call(s): {}", n.attempts, path.display());
                }
                EXIT_OK
            }
            Err(e) => pipeline_failure(&e, json, io),
        };
    }

    let run = match run_pipeline(topic, spec, &providers, &config) {
        Ok(r) => r,
        Err(e) => return pipeline_failure(&e, json, io),
    };
    let files = match write_run_artifacts(&args.out, &run) {
        Ok(f) => f,
        Err(e) => {
            say!(io.err, "error: cannot write artifacts: {e}");
            return EXIT_USAGE;
        }
    };
    let passed = run.evaluation.passed();
    if json {
        say!(
            io.out,
            "{}",
            json!({
                "verdict": run.evaluation.verdict,
                "files": files,
                "directives": run.evaluation.directives,
                "units": run.execution.units,
            })
        );
    } else {
        for f in &files {
            say!(io.out, "wrote {}", f.display());
        }
        for u in &run.execution.units {
            say!(
                io.out,
                "{}: text {} attempt(s), widget {} attempt(s){}",
                u.unit_id,
                u.attempts_text,
                u.attempts_widget,
                if u.widget_fallback { ", compiler fallback" } else { "" }
            );
        }
        say!(io.out, "verdict: {}", if passed { "pass" } else { "fail" });
        for d in &run.evaluation.directives {
            say!(io.out, "  regenerate {} {}", d.unit, d.stage.as_str());
        }
    }
    if passed {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

pub fn cmd_compare(
    topic: &str,
    out: &Path,
    provider: &ProviderArgs,
    pipeline_args: &PipelineArgs,
    json: bool,
    io: &mut Io<'_>,
) -> i32 {
    let config = pipeline_args.config(WidgetMode::Deterministic);
    if let Err(e) = config.check() {
        say!(io.err, "error: {e}");
        return EXIT_USAGE;
    }
    let providers = match providers(provider, io) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let summary = match pipeline::compare(topic, &providers, &config, out) {
        Ok(s) => s,
        Err(e) => {
            say!(io.err, "error: cannot write comparison: {e}");
            return EXIT_USAGE;
        }
    };
    if json {
        say!(io.out, "{}", serde_json::to_string(&summary).expect("summary serializes"));
    } else {
        for arm in [&summary.naive, &summary.pipeline] {
            say!(
                io.out,
                "{}: {}, {} provider call(s), docspec {}",
                arm.arm,
                arm.status,
                arm.provider_calls,
                if arm.has_docspec { "yes" } else { "no" }
            );
            for a in &arm.artifacts {
                say!(io.out, "  {a}");
            }
        }
    }
    if summary.naive.status == "ok" && summary.pipeline.status == "ok" {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    log::info!("shutdown requested");
}

pub fn cmd_serve(args: &ServeArgs, io: &mut Io<'_>) -> i32 {
    let addr: SocketAddr = match args.addr.parse() {
        Ok(a) => a,
        Err(e) => {
            say!(io.err, "error: bad address '{}': {e}", args.addr);
            return EXIT_USAGE;
        }
    };
    let source = match ProviderSource::resolve(args.provider.fixtures.clone()) {
        Ok(s) => s,
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let config = ServiceConfig {
        addr,
        data_dir: args.data_dir.clone(),
        cors: args.cors,
        workers: args.workers,
        source,
        pipeline: args.pipeline.config(WidgetMode::Deterministic),
    };
    let rt = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            say!(io.err, "error: cannot start runtime: {e}");
            return EXIT_USAGE;
        }
    };
    match rt.block_on(service::serve(config, shutdown_signal())) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            say!(io.err, "error: {e}");
            EXIT_USAGE
        }
    }
}
