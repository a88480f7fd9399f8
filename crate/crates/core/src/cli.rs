//! The `coincidence` command line: `solve`, `gallery` and `compare`.
//!
//! Exit codes: 0 when converged, 2 when the step limit was reached with a
//! valid partial certificate, 1 on a hypothesis violation (named H1, H2 or
//! crossing) or an unreadable or invalid config.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::baseline::{alpha_iterate, compare_methods, AlphaCoveringProblem, BaselineError};
use crate::config::{gallery, BuiltProblem, ConfigError, Method, ProblemConfig, GALLERY};
use crate::covering::verify_covering_sampled;
use crate::exec::{map_slice, AuditOptions, Execution};
use crate::majorant::smallest_crossing;
use crate::problems::ProblemError;
use crate::report::{compare_csv, summary_text, trace_csv, SummaryInput};
use crate::solver::{
    certify_trace, coincidence_solve_with, rate_estimate, H2Check, Hypothesis, SolveOptions, TraceStatus,
};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_MAX_STEPS: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "coincidence", version, about = "Coincidence points of covering and smooth maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one or more configs.
    Solve(SolveArgs),
    /// List the built-in configs or write one out.
    Gallery {
        #[command(subcommand)]
        action: GalleryAction,
    },
    /// Run the majorant and α-covering iterations side by side.
    Compare(CompareArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct Overrides {
    /// Residual tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Step limit.
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Fail instead of warning when the derivative majorant is violated.
    #[arg(long)]
    pub strict_h2: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Config file; repeat for several, each written to `OUT/<stem>/`.
    #[arg(long, required = true)]
    pub config: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Worker threads when solving several configs.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum GalleryAction {
    List,
    Emit {
        name: String,
        /// Directory for `<name>.json`; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Gallery { action } => cmd_gallery(action),
        Command::Compare(args) => cmd_compare(&args),
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<ProblemConfig, ConfigError> {
    let mut config = ProblemConfig::load(path)?;
    if let Some(tol) = overrides.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(ConfigError::Invalid(format!("--tol must be positive, got {tol}")));
        }
        config.solver.tolerance = tol;
    }
    if let Some(steps) = overrides.max_steps {
        config.solver.max_steps = steps;
    }
    config.solver.strict_h2 |= overrides.strict_h2;
    Ok(config)
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    }
    fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn config_error(path: &Path, e: &ConfigError) -> i32 {
    let hypothesis = match e {
        ConfigError::Problem(ProblemError::Solve(s)) => Some(s.hypothesis()),
        ConfigError::Problem(ProblemError::Majorant(_)) => Some(Hypothesis::Crossing),
        _ => None,
    };
    match hypothesis {
        Some(h) => eprintln!("{}: hypothesis violation ({h}): {e}", path.display()),
        None => eprintln!("{}: {e}", path.display()),
    }
    EXIT_FAILURE
}

pub fn cmd_solve(args: &SolveArgs) -> i32 {
    let single = args.config.len() == 1;
    let job = |path: &PathBuf| {
        let out = if single {
            args.out.clone()
        } else {
            let stem = path.file_stem().map_or_else(|| "config".into(), |s| s.to_string_lossy().into_owned());
            args.out.join(stem)
        };
        solve_one(path, &out, &args.overrides)
    };
    let codes = match args.jobs {
        Some(0) => {
            eprintln!("--jobs must be positive");
            return EXIT_FAILURE;
        }
        Some(jobs) => with_pool(jobs, || map_slice(&args.config, Execution::default(), job)),
        None => map_slice(&args.config, Execution::default(), job),
    };
    if codes.contains(&EXIT_FAILURE) {
        EXIT_FAILURE
    } else if codes.contains(&EXIT_MAX_STEPS) {
        EXIT_MAX_STEPS
    } else {
        EXIT_CONVERGED
    }
}

#[cfg(feature = "parallel")]
fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("cannot build a {jobs}-thread pool ({e}); using the global pool");
            f()
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    log::warn!("built without the `parallel` feature; ignoring --jobs {jobs}");
    f()
}

fn solve_one(path: &Path, out: &Path, overrides: &Overrides) -> i32 {
    let config = match load(path, overrides) {
        Ok(c) => c,
        Err(e) => return config_error(path, &e),
    };
    let built = match config.build() {
        Ok(b) => b,
        Err(e) => return config_error(path, &e),
    };
    let result = match config.solver.method {
        Method::Majorant => solve_majorant(&config, &built, out),
        Method::Baseline => solve_baseline(&config, &built, out),
        Method::Compare => match &built.quadratic {
            Some(q) => run_compare(&config, q, out),
            None => Err("method `compare` needs a quadratic problem".into()),
        },
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("{}: {msg}", path.display());
            EXIT_FAILURE
        }
    }
}

fn audit_options(config: &ProblemConfig) -> AuditOptions {
    AuditOptions::new(config.solver.audit_samples).seed(config.solver.seed)
}

fn solve_majorant(config: &ProblemConfig, built: &BuiltProblem, out: &Path) -> Result<i32, String> {
    let p = &built.instance;
    let name = config.name.as_deref();
    let tau_star = smallest_crossing(p.majorants()).map_err(|e| format!("hypothesis violation (crossing): {e}"))?;
    let radius = tau_star - p.majorants().tau0();

    let h1 = (radius > 0.0).then(|| verify_covering_sampled(p.cover(), p.x0(), radius, &audit_options(config)));
    if let Some(audit) = h1.as_ref().filter(|a| !a.passed()) {
        let diagnostic = format!("H1: covering audit failed at {} of {} trials", audit.violations, audit.trials);
        let summary = SummaryInput {
            name,
            method: "majorant",
            status: "HypothesisViolation(H1)".into(),
            h1: Some(audit),
            diagnostic: Some(diagnostic.clone()),
            ..SummaryInput::default()
        };
        write_file(&out.join("summary.txt"), &summary_text(&summary))?;
        eprintln!("hypothesis violation ({diagnostic})");
        return Ok(EXIT_FAILURE);
    }

    let opts = SolveOptions {
        residual_tol: config.solver.tolerance,
        max_steps: config.solver.max_steps,
        h2_check: if config.solver.strict_h2 { H2Check::Strict } else { H2Check::Warn },
        h2_audit: audit_options(config),
    };
    match coincidence_solve_with(p, &opts) {
        Ok(sol) => {
            let certificate = certify_trace(&sol.trace, p.majorants());
            write_file(&out.join("trace.csv"), &trace_csv(&sol.trace))?;
            let summary = SummaryInput {
                name,
                method: "majorant",
                status: sol.trace.status.to_string(),
                x_star: Some(&sol.x_star),
                tau_star: Some(sol.tau_star),
                trace: Some(&sol.trace),
                certificate: Some(certificate),
                rate: Some(rate_estimate(&sol.trace)),
                h1: h1.as_ref(),
                h2: sol.h2_report.as_ref(),
                diagnostic: None,
            };
            write_file(&out.join("summary.txt"), &summary_text(&summary))?;
            println!(
                "{}: {} after {} steps, residual {:.3e}",
                name.unwrap_or("problem"),
                sol.trace.status,
                sol.trace.steps(),
                sol.residual()
            );
            Ok(match sol.trace.status {
                TraceStatus::Converged => EXIT_CONVERGED,
                TraceStatus::MaxSteps if certificate.holds() => EXIT_MAX_STEPS,
                _ => EXIT_FAILURE,
            })
        }
        Err(e) => {
            let hypothesis = e.hypothesis();
            let diagnostic = format!("{hypothesis}: {e}");
            let trace = e.partial_trace();
            if let Some(trace) = trace {
                write_file(&out.join("trace.csv"), &trace_csv(trace))?;
            }
            let summary = SummaryInput {
                name,
                method: "majorant",
                status: format!("HypothesisViolation({hypothesis})"),
                tau_star: Some(tau_star),
                trace,
                certificate: trace.map(|t| certify_trace(t, p.majorants())),
                h1: h1.as_ref(),
                diagnostic: Some(diagnostic.clone()),
                ..SummaryInput::default()
            };
            write_file(&out.join("summary.txt"), &summary_text(&summary))?;
            eprintln!("hypothesis violation ({diagnostic})");
            Ok(EXIT_FAILURE)
        }
    }
}

fn solve_baseline(config: &ProblemConfig, built: &BuiltProblem, out: &Path) -> Result<i32, String> {
    let q = built.quadratic.as_ref().ok_or("method `baseline` needs a quadratic problem")?;
    let p = AlphaCoveringProblem::from_quadratic(q).map_err(|e| e.to_string())?;
    match alpha_iterate(&p, built.instance.x0(), config.solver.tolerance, config.solver.max_steps) {
        Ok((x, trace)) => {
            write_file(&out.join("trace.csv"), &trace_csv(&trace))?;
            let summary = SummaryInput {
                name: config.name.as_deref(),
                method: "baseline",
                status: trace.status.to_string(),
                x_star: Some(&x),
                trace: Some(&trace),
                rate: Some(rate_estimate(&trace)),
                ..SummaryInput::default()
            };
            write_file(&out.join("summary.txt"), &summary_text(&summary))?;
            Ok(if trace.status == TraceStatus::Converged { EXIT_CONVERGED } else { EXIT_MAX_STEPS })
        }
        Err(e @ BaselineError::NotContractive { .. }) => Err(e.to_string()),
        Err(e) => Err(format!("hypothesis violation (H1): {e}")),
    }
}

fn run_compare(config: &ProblemConfig, q: &crate::problems::QuadraticProblem, out: &Path) -> Result<i32, String> {
    let cmp = compare_methods(q, config.solver.tolerance, config.solver.max_steps).map_err(|e| e.to_string())?;
    write_file(&out.join("compare.csv"), &compare_csv(&cmp))?;
    for run in [&cmp.majorant, &cmp.baseline] {
        if let Some(trace) = &run.trace {
            write_file(&out.join(format!("trace_{}.csv", run.method)), &trace_csv(trace))?;
        }
    }
    let mut text = format!(
        "alpha: {}\nbeta: {}\nbaseline_applicable: {}\ndiscriminant: {}\n",
        crate::report::fmt_float(cmp.alpha),
        crate::report::fmt_float(cmp.beta),
        cmp.applicable,
        crate::report::fmt_float(cmp.discriminant)
    );
    for run in [&cmp.majorant, &cmp.baseline] {
        text.push('\n');
        text.push_str(&summary_text(&SummaryInput {
            name: config.name.as_deref(),
            method: run.method,
            status: run.status.to_string(),
            x_star: run.x_star.as_ref(),
            trace: run.trace.as_ref(),
            rate: run.trace.as_ref().map(rate_estimate),
            ..SummaryInput::default()
        }));
    }
    write_file(&out.join("summary.txt"), &text)?;
    print!("{}", compare_csv(&cmp));
    Ok(EXIT_CONVERGED)
}

pub fn cmd_compare(args: &CompareArgs) -> i32 {
    let config = match load(&args.config, &args.overrides) {
        Ok(c) => c,
        Err(e) => return config_error(&args.config, &e),
    };
    let built = match config.build() {
        Ok(b) => b,
        Err(e) => return config_error(&args.config, &e),
    };
    let Some(q) = &built.quadratic else {
        eprintln!("{}: compare needs a quadratic problem", args.config.display());
        return EXIT_FAILURE;
    };
    match run_compare(&config, q, &args.out) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("{}: {msg}", args.config.display());
            EXIT_FAILURE
        }
    }
}

pub fn cmd_gallery(action: GalleryAction) -> i32 {
    match action {
        GalleryAction::List => {
            for name in GALLERY {
                println!("{name}");
            }
            EXIT_CONVERGED
        }
        GalleryAction::Emit { name, out } => {
            let Some(config) = gallery(&name) else {
                eprintln!("unknown gallery instance `{name}`; try `gallery list`");
                return EXIT_FAILURE;
            };
            let json = config.to_json();
            match out {
                None => {
                    println!("{json}");
                    EXIT_CONVERGED
                }
                Some(dir) => match write_file(&dir.join(format!("{name}.json")), &json) {
                    Ok(()) => EXIT_CONVERGED,
                    Err(msg) => {
                        eprintln!("{msg}");
                        EXIT_FAILURE
                    }
                },
            }
        }
    }
}
