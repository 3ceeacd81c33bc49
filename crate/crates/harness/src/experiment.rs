//! Experiment specs, problem assembly and the solver matrix runner.
//!
//! A run writes, per solver, `<name>.trace.csv`, `<name>.iterates.csv` and,
//! with diagnostics on, `<name>.cert.json`; then `summary.json` with the
//! spec, the relative constants, `f*` with its provenance and per-solver
//! results.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use augnewton::diagnostics::{
    certify_anm_lyapunov, certify_pnm_rate, ContractionReport, DiagnosticsError,
};
use augnewton::linalg::Vector;
use augnewton::objective::{GlmProblem, Link, Objective, ObjectiveError, Quadratic};
use augnewton::solvers::{
    optimum_oracle, run, IterateTrace, Method, PenaltySchedule, Preconditioner, SolverConfig,
    SolverError, Termination,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{labels_for_link, load_dataset, DatasetError, Format};
use crate::instances::synthetic_glm;
use crate::trace_io::{load_trace, write_iterates, write_trace, TraceError};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("solver `{name}` failed: {source}")]
    Solver {
        name: String,
        #[source]
        source: SolverError,
    },
    #[error("certification of `{name}` failed: {source}")]
    Diagnostics {
        name: String,
        #[source]
        source: DiagnosticsError,
    },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
}

impl ExperimentError {
    /// 1 for solver and certification failures, 2 for input problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Solver { .. } | ExperimentError::Diagnostics { .. } => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// A data file; relative paths are resolved against the spec file.
    Dataset { path: PathBuf, format: Format },
    /// Generated GLM data, see [`crate::instances::synthetic_glm`].
    Synthetic { features: usize, samples: usize },
    /// `½xᵀQx − 1ᵀx` with the tridiagonal `Q = tridiag(−1, 2, −1)`.
    Quadratic { dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecondKind {
    #[default]
    Identity,
    Diag,
}

impl PrecondKind {
    pub fn preconditioner(self) -> Preconditioner {
        match self {
            PrecondKind::Identity => Preconditioner::Identity,
            PrecondKind::Diag => Preconditioner::HessianDiagonal,
        }
    }
}

impl std::str::FromStr for PrecondKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "identity" => Ok(PrecondKind::Identity),
            "diag" => Ok(PrecondKind::Diag),
            other => Err(format!(
                "unknown preconditioner `{other}` (expected identity or diag)"
            )),
        }
    }
}

fn default_rho0() -> f64 {
    1.0
}

fn default_c() -> f64 {
    2.0
}

fn default_rho_max() -> f64 {
    1e12
}

fn default_max_iters() -> usize {
    500
}

fn default_tol() -> f64 {
    1e-8
}

fn default_alpha() -> f64 {
    0.1
}

fn default_link() -> Link {
    Link::Logistic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    /// File stem for this solver's outputs; defaults to the method name.
    #[serde(default)]
    pub name: Option<String>,
    pub method: Method,
    #[serde(default)]
    pub precond: PrecondKind,
    #[serde(default = "default_rho0")]
    pub rho0: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_rho_max")]
    pub rho_max: f64,
    /// Step constant `L`; defaults to the problem's relative smoothness
    /// constant (1 for damped Newton, whose line search sets the step).
    #[serde(default)]
    pub step_l: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl SolverSpec {
    pub fn new(method: Method) -> Self {
        Self {
            name: None,
            method,
            precond: PrecondKind::Identity,
            rho0: default_rho0(),
            c: default_c(),
            rho_max: default_rho_max(),
            step_l: None,
            max_iters: default_max_iters(),
            tol: default_tol(),
        }
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = Some(name.to_string());
        self
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.method.as_str().to_string())
    }

    fn config(&self, constants: &Constants, f_star: f64) -> SolverConfig {
        let default_l = if self.method == Method::DampedNewton {
            1.0
        } else {
            constants.l
        };
        SolverConfig::new(self.method)
            .with_precond(self.precond.preconditioner())
            .with_schedule(PenaltySchedule {
                rho0: self.rho0,
                c: self.c,
                rho_max: self.rho_max,
            })
            .with_step_l(self.step_l.unwrap_or(default_l))
            .with_max_iters(self.max_iters)
            .with_grad_tol(self.tol)
            .with_f_star(f_star)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum FStarPolicy {
    /// Damped Newton to `‖∇f‖ ≤ 1e-13` with 100 times the largest budget.
    #[default]
    Oracle,
    Provided {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    #[serde(default = "default_link")]
    pub link: Link,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub solvers: Vec<SolverSpec>,
    #[serde(default)]
    pub seed: u64,
    pub out: PathBuf,
    #[serde(default)]
    pub diagnostics: bool,
    #[serde(default)]
    pub fstar: FStarPolicy,
    /// Record wall-clock `elapsed_ns`; off keeps traces byte-identical.
    #[serde(default)]
    pub timing: bool,
    /// Starting point; zeros when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

impl ExperimentSpec {
    /// Reads a JSON spec and resolves a relative dataset path against the
    /// spec's directory.
    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut spec: ExperimentSpec =
            serde_json::from_str(&text).map_err(|source| ExperimentError::Json {
                path: path.to_path_buf(),
                source,
            })?;
        if let ProblemSpec::Dataset { path: data, .. } = &mut spec.problem {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.solvers.is_empty() {
            return Err(ExperimentError::InvalidSpec(
                "at least one solver is required".into(),
            ));
        }
        let mut seen = HashSet::new();
        for s in &self.solvers {
            let name = s.label();
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(ExperimentError::InvalidSpec(format!(
                    "bad solver name `{name}`"
                )));
            }
            if !seen.insert(name.clone()) {
                return Err(ExperimentError::InvalidSpec(format!(
                    "duplicate solver name `{name}`"
                )));
            }
        }
        Ok(())
    }
}

/// The assembled objective.
#[derive(Debug, Clone)]
pub enum Problem {
    Glm(GlmProblem),
    Quadratic(Quadratic),
}

impl Problem {
    pub fn objective(&self) -> &dyn Objective {
        match self {
            Problem::Glm(g) => g,
            Problem::Quadratic(q) => q,
        }
    }

    pub fn constants(&self) -> Constants {
        match self {
            Problem::Glm(g) => {
                let c = g.constants();
                Constants {
                    l: c.l,
                    mu: c.mu,
                    u: Some(c.u),
                    ell: Some(c.ell),
                    sigma_max_sq: Some(c.sigma_max_sq),
                }
            }
            Problem::Quadratic(_) => Constants {
                l: 1.0,
                mu: 1.0,
                u: None,
                ell: None,
                sigma_max_sq: None,
            },
        }
    }
}

pub fn build_problem(spec: &ExperimentSpec) -> Result<Problem, ExperimentError> {
    let data = match &spec.problem {
        ProblemSpec::Quadratic { dim } => {
            if *dim == 0 {
                return Err(ExperimentError::InvalidSpec(
                    "quadratic dimension must be positive".into(),
                ));
            }
            return Ok(Problem::Quadratic(Quadratic::laplacian(*dim)));
        }
        ProblemSpec::Dataset { path, format } => load_dataset(path, *format)?,
        ProblemSpec::Synthetic { features, samples } => {
            if *features == 0 || *samples == 0 {
                return Err(ExperimentError::InvalidSpec(
                    "synthetic sizes must be positive".into(),
                ));
            }
            synthetic_glm(*features, *samples, spec.link, spec.seed)
        }
    };
    let labels = labels_for_link(&data.labels, spec.link)?;
    Ok(Problem::Glm(GlmProblem::new(
        data.a,
        spec.link,
        spec.alpha,
        Some(labels),
    )?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    #[serde(rename = "L")]
    pub l: f64,
    pub mu: f64,
    pub u: Option<f64>,
    pub ell: Option<f64>,
    pub sigma_max_sq: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FStarInfo {
    pub value: f64,
    pub source: FStarSource,
    /// Gradient norm where the oracle stopped.
    pub oracle_grad_norm: Option<f64>,
    pub oracle_iterations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FStarSource {
    Oracle,
    Provided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub file: String,
    pub kind: augnewton::diagnostics::CertificateKind,
    pub certified: bool,
    pub fully_informative: bool,
    pub fraction_satisfied: f64,
    pub vacuous_count: usize,
    pub worst_slack: Option<f64>,
    pub xi_min: Option<f64>,
    pub beta_min: Option<f64>,
    pub lyapunov_nonincreasing: Option<bool>,
}

impl CertificateSummary {
    fn new(file: String, r: &ContractionReport) -> Self {
        Self {
            file,
            kind: r.kind,
            certified: r.certified,
            fully_informative: r.fully_informative(),
            fraction_satisfied: r.fraction_satisfied,
            vacuous_count: r.vacuous_count,
            worst_slack: r.worst_slack,
            xi_min: r.xi_min,
            beta_min: r.beta_min,
            lyapunov_nonincreasing: r.lyapunov_nonincreasing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub name: String,
    pub method: Method,
    pub precond: PrecondKind,
    pub schedule: PenaltySchedule,
    #[serde(rename = "L")]
    pub step_l: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub termination: Option<Termination>,
    /// Update steps taken.
    pub iterations: Option<usize>,
    /// First trace index with `‖∇f‖ ≤ tol`.
    pub iterations_to_tol: Option<usize>,
    pub final_f: Option<f64>,
    pub final_gap: Option<f64>,
    pub final_grad_norm: Option<f64>,
    pub trace_file: Option<String>,
    pub iterates_file: Option<String>,
    pub certificate: Option<CertificateSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub spec: ExperimentSpec,
    pub features: usize,
    pub constants: Constants,
    pub f_star: FStarInfo,
    pub solvers: Vec<SolverSummary>,
}

impl Summary {
    pub fn read(out_dir: &Path) -> Result<Self, ExperimentError> {
        let path = out_dir.join(SUMMARY_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|source| ExperimentError::Json { path, source })
    }

    pub fn solver(&self, name: &str) -> Option<&SolverSummary> {
        self.solvers.iter().find(|s| s.name == name)
    }
}

pub fn start_point(spec: &ExperimentSpec, dim: usize) -> Result<Vector, ExperimentError> {
    match &spec.x0 {
        None => Ok(Vector::zeros(dim)),
        Some(x) if x.len() == dim => Ok(Vector::from_column_slice(x)),
        Some(x) => Err(ExperimentError::InvalidSpec(format!(
            "x0 has {} entries for a {dim}-dimensional problem",
            x.len()
        ))),
    }
}

/// Resolves `f*` per the policy.
pub fn resolve_f_star(
    spec: &ExperimentSpec,
    problem: &Problem,
    x0: &Vector,
) -> Result<FStarInfo, ExperimentError> {
    match spec.fstar {
        FStarPolicy::Provided { value } => Ok(FStarInfo {
            value,
            source: FStarSource::Provided,
            oracle_grad_norm: None,
            oracle_iterations: None,
        }),
        FStarPolicy::Oracle => {
            let budget = spec.solvers.iter().map(|s| s.max_iters).max().unwrap_or(1);
            let out = optimum_oracle(problem.objective(), x0, budget).map_err(|source| {
                ExperimentError::Solver {
                    name: "f* oracle".into(),
                    source,
                }
            })?;
            Ok(FStarInfo {
                value: out.optimum.value,
                source: FStarSource::Oracle,
                oracle_grad_norm: Some(out.grad_norm),
                oracle_iterations: Some(out.iterations),
            })
        }
    }
}

/// Certificate for penalty methods; `None` for Newton variants.
pub fn certify(
    problem: &Problem,
    precond: PrecondKind,
    trace: &IterateTrace,
    step_l: f64,
) -> Option<Result<ContractionReport, DiagnosticsError>> {
    let mu = problem.constants().mu;
    let precond = precond.preconditioner();
    match trace.method {
        Method::Pnm => Some(certify_pnm_rate(
            trace,
            problem.objective(),
            &precond,
            mu,
            step_l,
        )),
        Method::Anm => Some(certify_anm_lyapunov(
            trace,
            problem.objective(),
            &precond,
            mu,
            step_l,
        )),
        Method::Newton | Method::DampedNewton => None,
    }
}

/// A finished solver run, in memory.
#[derive(Debug, Clone)]
pub struct SolverOutcome {
    pub trace: IterateTrace,
    pub report: Option<ContractionReport>,
}

pub fn execute_solver(
    problem: &Problem,
    solver: &SolverSpec,
    x0: &Vector,
    f_star: f64,
    diagnostics: bool,
    timing: bool,
) -> Result<SolverOutcome, ExperimentError> {
    let name = solver.label();
    let mut cfg = solver.config(&problem.constants(), f_star);
    cfg.record_timing = timing;
    let trace = run(problem.objective(), x0, &cfg).map_err(|source| ExperimentError::Solver {
        name: name.clone(),
        source,
    })?;
    let report = if diagnostics {
        certify(problem, solver.precond, &trace, cfg.step_l)
            .transpose()
            .map_err(|source| ExperimentError::Diagnostics { name, source })?
    } else {
        None
    };
    Ok(SolverOutcome { trace, report })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| ExperimentError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn report_json(report: &ContractionReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("reports hold finite numbers");
    text.push('\n');
    text
}

/// Workers for `jobs` tasks: `PN_THREADS` if set, else the available
/// parallelism.
pub fn worker_count(jobs: usize) -> usize {
    let cap = std::env::var("PN_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cap.min(jobs).max(1)
}

fn run_one(
    problem: &Problem,
    spec: &ExperimentSpec,
    solver: &SolverSpec,
    x0: &Vector,
    f_star: f64,
) -> (SolverSummary, Option<ExperimentError>) {
    let name = solver.label();
    let cfg = solver.config(&problem.constants(), f_star);
    let mut summary = SolverSummary {
        name: name.clone(),
        method: solver.method,
        precond: solver.precond,
        schedule: cfg.schedule,
        step_l: cfg.step_l,
        tol: solver.tol,
        max_iters: solver.max_iters,
        termination: None,
        iterations: None,
        iterations_to_tol: None,
        final_f: None,
        final_gap: None,
        final_grad_norm: None,
        trace_file: None,
        iterates_file: None,
        certificate: None,
        error: None,
    };
    let fail = |summary: &mut SolverSummary, e: ExperimentError| {
        summary.error = Some(e.to_string());
        Some(e)
    };
    let mut cfg_run = cfg.clone();
    cfg_run.record_timing = spec.timing;
    let trace = match run(problem.objective(), x0, &cfg_run) {
        Ok(t) => t,
        Err(source) => {
            let e = fail(&mut summary, ExperimentError::Solver { name, source });
            return (summary, e);
        }
    };
    let last = trace.last();
    summary.termination = Some(trace.termination);
    summary.iterations = Some(trace.steps());
    summary.iterations_to_tol = trace.first_below(solver.tol);
    summary.final_f = Some(last.f);
    summary.final_gap = trace.gap(last);
    summary.final_grad_norm = Some(last.grad_norm);

    let trace_file = format!("{name}.trace.csv");
    let iterates_file = format!("{name}.iterates.csv");
    if let Err(e) = write_trace(&spec.out.join(&trace_file), &trace) {
        let e = fail(&mut summary, e.into());
        return (summary, e);
    }
    if let Err(e) = write_iterates(&spec.out.join(&iterates_file), &trace) {
        let e = fail(&mut summary, e.into());
        return (summary, e);
    }
    summary.trace_file = Some(trace_file);
    summary.iterates_file = Some(iterates_file);

    if spec.diagnostics {
        match certify(problem, solver.precond, &trace, cfg.step_l) {
            None => {}
            Some(Err(source)) => {
                let e = fail(&mut summary, ExperimentError::Diagnostics { name, source });
                return (summary, e);
            }
            Some(Ok(report)) => {
                let file = format!("{name}.cert.json");
                let path = spec.out.join(&file);
                if let Err(source) = fs::write(&path, report_json(&report)) {
                    let e = fail(&mut summary, ExperimentError::Io { path, source });
                    return (summary, e);
                }
                summary.certificate = Some(CertificateSummary::new(file, &report));
            }
        }
    }
    (summary, None)
}
type SolverSlot = (SolverSummary, Option<ExperimentError>);

/// Runs every solver of the spec, writes all outputs and the summary. When a
/// solver fails the others still run, the summary records the failure, and
/// the first failure is returned after everything is flushed.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Summary, ExperimentError> {
    spec.validate()?;
    let problem = build_problem(spec)?;
    let dim = problem.objective().dim();
    let x0 = start_point(spec, dim)?;
    let f_star = resolve_f_star(spec, &problem, &x0)?;
    fs::create_dir_all(&spec.out).map_err(io_err(&spec.out))?;

    let jobs = spec.solvers.len();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<SolverSlot>>> = Mutex::new((0..jobs).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..worker_count(jobs) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let out = run_one(&problem, spec, &spec.solvers[i], &x0, f_star.value);
                results
                    .lock()
                    .expect("no worker panics while holding the lock")[i] = Some(out);
            });
        }
    });

    let mut first_error = None;
    let mut solvers = Vec::with_capacity(jobs);
    for slot in results.into_inner().expect("workers joined") {
        let (summary, err) = slot.expect("every job ran");
        if first_error.is_none() {
            first_error = err;
        }
        solvers.push(summary);
    }
    let summary = Summary {
        spec: spec.clone(),
        features: dim,
        constants: problem.constants(),
        f_star,
        solvers,
    };
    write_json(&spec.out.join(SUMMARY_FILE), &summary)?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

/// Re-certifies a written trace from its files and the stored summary.
/// `dataset` overrides the dataset path recorded in the summary.
pub fn certify_written(
    out_dir: &Path,
    solver: &str,
    dataset: Option<&Path>,
) -> Result<ContractionReport, ExperimentError> {
    let summary = Summary::read(out_dir)?;
    let entry = summary.solver(solver).ok_or_else(|| {
        ExperimentError::InvalidSpec(format!("no solver `{solver}` in the summary"))
    })?;
    if !entry.method.uses_penalty() {
        return Err(ExperimentError::InvalidSpec(format!(
            "`{solver}` ran {}, which has no rate certificate",
            entry.method.as_str()
        )));
    }
    let mut spec = summary.spec.clone();
    if let (Some(p), ProblemSpec::Dataset { path, .. }) = (dataset, &mut spec.problem) {
        *path = p.to_path_buf();
    }
    let problem = build_problem(&spec)?;
    let (Some(trace_file), Some(iterates_file), Some(termination)) =
        (&entry.trace_file, &entry.iterates_file, entry.termination)
    else {
        return Err(ExperimentError::InvalidSpec(format!(
            "`{solver}` has no trace on disk"
        )));
    };
    let trace = load_trace(
        &out_dir.join(trace_file),
        &out_dir.join(iterates_file),
        entry.method,
        termination,
        Some(summary.f_star.value),
    )?;
    certify(&problem, entry.precond, &trace, entry.step_l)
        .expect("penalty methods are certified")
        .map_err(|source| ExperimentError::Diagnostics {
            name: solver.to_string(),
            source,
        })
}
