//! The `augnewton` command line. Exit codes: 0 success, 1 solver or
//! certification failure, 2 usage or input error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use augnewton::objective::Link;
use augnewton::solvers::{root_augmented_newton, root_penalty_newton, Method, RootResult};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::Format;
use crate::experiment::{
    build_problem, certify_written, execute_solver, report_json, resolve_f_star, run_experiment,
    start_point, ExperimentError, ExperimentSpec, FStarPolicy, PrecondKind, ProblemSpec,
    SolverSpec, Summary,
};
use crate::poly::Polynomial;

#[derive(Debug, Parser)]
#[command(
    name = "augnewton",
    version,
    about = "Penalty and augmented Newton solvers for GLM benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment spec (JSON) and write traces and a summary.
    Run {
        spec: PathBuf,
        /// Output directory, overriding the spec.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Certify penalty-method traces.
        #[arg(long)]
        diagnostics: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve one problem given by flags.
    Solve(SolveArgs),
    /// Re-run the rate certificate on a written trace.
    Certify {
        /// Directory holding summary.json and the trace files.
        #[arg(long)]
        out: PathBuf,
        /// Solver name as recorded in the summary.
        #[arg(long)]
        solver: String,
        /// Dataset path, if it moved since the run.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Fail unless the report equals the stored `<solver>.cert.json`.
        #[arg(long)]
        check: bool,
    },
    /// Scalar root finding with the penalty and augmented updates.
    DemoRoot {
        /// Polynomial in x, e.g. "x^2-2".
        #[arg(long)]
        poly: String,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, allow_hyphen_values = true)]
        x0: f64,
        /// Second seed for the augmented variant; defaults to x0.
        #[arg(long, allow_hyphen_values = true)]
        x1: Option<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        #[arg(long, value_enum, default_value_t = RootVariant::Both)]
        variant: RootVariant,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RootVariant {
    Penalty,
    Augmented,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    Quadratic,
    Synthetic,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Dataset file; when absent a built-in problem is used.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = parse_from_str::<Format>)]
    pub format: Format,
    /// Built-in problem used without --data.
    #[arg(long, value_enum, default_value_t = ProblemKind::Quadratic)]
    pub problem: ProblemKind,
    /// Dimension of the built-in quadratic.
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    #[arg(long, default_value_t = 20)]
    pub features: usize,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value = "pnm", value_parser = parse_from_str::<Method>)]
    pub method: Method,
    #[arg(long, default_value = "identity", value_parser = parse_from_str::<PrecondKind>)]
    pub precond: PrecondKind,
    #[arg(long, default_value_t = 1.0)]
    pub rho0: f64,
    #[arg(long, default_value_t = 2.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1e12)]
    pub rho_max: f64,
    /// Step constant L; defaults to the problem's relative smoothness constant.
    #[arg(long)]
    pub step_l: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value = "logistic", value_parser = parse_from_str::<Link>)]
    pub link: Link,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write traces and summary here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub diagnostics: bool,
}

fn parse_from_str<T: std::str::FromStr<Err = String>>(s: &str) -> Result<T, String> {
    s.parse()
}

impl SolveArgs {
    fn spec(&self) -> ExperimentSpec {
        let problem = match (&self.data, self.problem) {
            (Some(path), _) => ProblemSpec::Dataset {
                path: path.clone(),
                format: self.format,
            },
            (None, ProblemKind::Quadratic) => ProblemSpec::Quadratic { dim: self.dim },
            (None, ProblemKind::Synthetic) => ProblemSpec::Synthetic {
                features: self.features,
                samples: self.samples,
            },
        };
        let solver = SolverSpec {
            precond: self.precond,
            rho0: self.rho0,
            c: self.c,
            rho_max: self.rho_max,
            step_l: self.step_l,
            max_iters: self.max_iters,
            tol: self.tol,
            ..SolverSpec::new(self.method)
        };
        ExperimentSpec {
            problem,
            link: self.link,
            alpha: self.alpha,
            solvers: vec![solver],
            seed: self.seed,
            out: self.out.clone().unwrap_or_default(),
            diagnostics: self.diagnostics,
            fstar: FStarPolicy::Oracle,
            timing: false,
            x0: None,
        }
    }
}

fn print_summary(summary: &Summary) {
    println!(
        "L = {:.6}, mu = {:.6}, f* = {:.15e} ({:?})",
        summary.constants.l, summary.constants.mu, summary.f_star.value, summary.f_star.source
    );
    for s in &summary.solvers {
        match &s.error {
            Some(e) => println!("{:<16} error: {e}", s.name),
            None => println!(
                "{:<16} {:?} after {} steps, f = {:.15e}, gap = {:.3e}, |grad| = {:.3e}",
                s.name,
                s.termination.expect("run finished"),
                s.iterations.unwrap_or(0),
                s.final_f.unwrap_or(f64::NAN),
                s.final_gap.unwrap_or(f64::NAN),
                s.final_grad_norm.unwrap_or(f64::NAN),
            ),
        }
        if let Some(c) = &s.certificate {
            println!(
                "{:<16} certificate {:?}: certified = {}, satisfied = {:.3}, vacuous = {}",
                "", c.kind, c.certified, c.fraction_satisfied, c.vacuous_count
            );
        }
    }
}

fn solve(args: &SolveArgs) -> Result<(), ExperimentError> {
    let spec = args.spec();
    if args.out.is_some() {
        let summary = run_experiment(&spec)?;
        print_summary(&summary);
        return Ok(());
    }
    spec.validate()?;
    let problem = build_problem(&spec)?;
    let x0 = start_point(&spec, problem.objective().dim())?;
    let f_star = resolve_f_star(&spec, &problem, &x0)?;
    let outcome = execute_solver(
        &problem,
        &spec.solvers[0],
        &x0,
        f_star.value,
        spec.diagnostics,
        false,
    )?;
    let last = outcome.trace.last();
    println!(
        "{} ({}): {:?} after {} steps, f = {:.15e}, gap = {:.3e}, |grad| = {:.3e}",
        args.method.as_str(),
        args.precond.preconditioner().label(),
        outcome.trace.termination,
        outcome.trace.steps(),
        last.f,
        last.f - f_star.value,
        last.grad_norm
    );
    if let Some(r) = outcome.report {
        println!(
            "certificate {:?}: certified = {}, satisfied = {:.3}, vacuous = {}",
            r.kind, r.certified, r.fraction_satisfied, r.vacuous_count
        );
    }
    Ok(())
}

fn print_root(label: &str, result: Result<RootResult, augnewton::solvers::RootError>) -> i32 {
    match result {
        Ok(r) => {
            println!(
                "{label}: root = {:.10} after {} iterations",
                r.root, r.iterations
            );
            let trace: Vec<String> = r.trace.iter().map(|x| format!("{x:.12}")).collect();
            println!("  trace: {}", trace.join(" "));
            0
        }
        Err(e) => {
            println!("{label}: {e}");
            1
        }
    }
}

fn demo_root(
    poly: &str,
    rho: f64,
    x0: f64,
    x1: Option<f64>,
    tol: f64,
    max_iters: usize,
    variant: RootVariant,
) -> i32 {
    let p = match Polynomial::parse(poly) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let dp = p.derivative();
    let f = |x: f64| p.eval(x);
    let fp = |x: f64| dp.eval(x);
    let mut code = 0;
    if variant != RootVariant::Augmented {
        code = code.max(print_root(
            "penalty",
            root_penalty_newton(f, fp, x0, rho, tol, max_iters),
        ));
    }
    if variant != RootVariant::Penalty {
        let x1 = x1.unwrap_or(x0);
        code = code.max(print_root(
            "augmented",
            root_augmented_newton(f, fp, x0, x1, rho, tol, max_iters),
        ));
    }
    code
}

fn certify_cmd(
    out: &Path,
    solver: &str,
    data: Option<&Path>,
    report: Option<&Path>,
    check: bool,
) -> Result<i32, ExperimentError> {
    let r = certify_written(out, solver, data)?;
    let text = report_json(&r);
    match report {
        Some(path) => std::fs::write(path, &text).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?,
        None => print!("{text}"),
    }
    if check {
        let stored_path = out.join(format!("{solver}.cert.json"));
        let stored =
            std::fs::read_to_string(&stored_path).map_err(|source| ExperimentError::Io {
                path: stored_path,
                source,
            })?;
        if stored != text {
            eprintln!("certificate differs from the stored report");
            return Ok(1);
        }
        eprintln!("certificate matches the stored report");
    }
    Ok(if r.certified { 0 } else { 1 })
}

fn report_error(e: ExperimentError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run {
            spec,
            out,
            diagnostics,
            seed,
        } => {
            let mut spec = match ExperimentSpec::from_file(&spec) {
                Ok(s) => s,
                Err(e) => return report_error(e),
            };
            if let Some(out) = out {
                spec.out = out;
            }
            spec.diagnostics |= diagnostics;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            match run_experiment(&spec) {
                Ok(summary) => {
                    print_summary(&summary);
                    0
                }
                Err(e) => report_error(e),
            }
        }
        Command::Solve(args) => match solve(&args) {
            Ok(()) => 0,
            Err(e) => report_error(e),
        },
        Command::Certify {
            out,
            solver,
            data,
            report,
            check,
        } => certify_cmd(&out, &solver, data.as_deref(), report.as_deref(), check)
            .unwrap_or_else(report_error),
        Command::DemoRoot {
            poly,
            rho,
            x0,
            x1,
            tol,
            max_iters,
            variant,
        } => demo_root(&poly, rho, x0, x1, tol, max_iters, variant),
    }
}
