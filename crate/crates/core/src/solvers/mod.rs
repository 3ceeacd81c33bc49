//! Iterative methods: Newton and damped Newton baselines, the penalty Newton
//! method (PNM), the augmented Newton method (ANM) in its multiplier and
//! momentum forms, their Levenberg-type specializations and the scalar
//! root-finding variants.

mod root;
mod run;
mod steps;

pub use root::{root_augmented_newton, root_penalty_newton, RootError, RootResult};
pub use run::{
    anm_run, anm_run_dual, damped_newton_run, newton_run, optimum_oracle, pnm_run, run, DualTrace,
    OracleOutcome,
};
pub use steps::{
    anm_step_dual, anm_step_momentum, augmented_levenberg_marquardt_step, augmented_levenberg_step,
    levenberg_marquardt_step, levenberg_step, newton_step, pnm_step, DualState,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, SymMatrix, Vector};
use crate::objective::Objective;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("gradient is not in the range of the Hessian (projection residual {residual:e})")]
    RangeViolation { residual: f64 },
    #[error("line search stalled at iteration {iteration} (step below 1e-16)")]
    LineSearchStall { iteration: usize },
    #[error("Hessian diagonal entry {index} is {value:e}; the diagonal preconditioner needs positive entries")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite iterate at step {iteration}")]
    NonFinite { iteration: usize },
}

pub type Result<T> = std::result::Result<T, SolverError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Newton,
    DampedNewton,
    Pnm,
    Anm,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Newton => "newton",
            Method::DampedNewton => "damped_newton",
            Method::Pnm => "pnm",
            Method::Anm => "anm",
        }
    }

    pub fn uses_penalty(self) -> bool {
        matches!(self, Method::Pnm | Method::Anm)
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "newton" => Ok(Method::Newton),
            "damped_newton" | "damped-newton" => Ok(Method::DampedNewton),
            "pnm" => Ok(Method::Pnm),
            "anm" => Ok(Method::Anm),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// How the penalty metric `G` is chosen at each iterate.
#[derive(Debug, Clone, PartialEq)]
pub enum Preconditioner {
    /// `G = I`: PNM becomes Levenberg, ANM augmented Levenberg.
    Identity,
    /// `G_k = diag(H(x_k))`, re-evaluated every iterate: Levenberg-Marquardt.
    HessianDiagonal,
    /// A fixed positive definite matrix.
    Fixed(SymMatrix),
}

impl Preconditioner {
    pub fn fixed(g: SymMatrix) -> Result<Self> {
        let eig = crate::linalg::sym_eig(&g)?;
        if eig.lambda_min() <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite { retries: 0 }.into());
        }
        Ok(Preconditioner::Fixed(g))
    }

    /// Realizes `G` at an iterate with Hessian `h`.
    pub fn realize(&self, h: &SymMatrix) -> Result<SymMatrix> {
        match self {
            Preconditioner::Identity => Ok(SymMatrix::identity(h.order())),
            Preconditioner::HessianDiagonal => {
                let d = h.diagonal();
                if let Some((index, &value)) = d.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
                    return Err(SolverError::NonPositiveDiagonal { index, value });
                }
                Ok(SymMatrix::from_diagonal(d.as_slice())?)
            }
            Preconditioner::Fixed(g) => {
                if g.order() != h.order() {
                    return Err(SolverError::DimensionMismatch {
                        expected: h.order(),
                        got: g.order(),
                    });
                }
                Ok(g.clone())
            }
        }
    }

    /// Short label used in file names and summaries.
    pub fn label(&self) -> &'static str {
        match self {
            Preconditioner::Identity => "identity",
            Preconditioner::HessianDiagonal => "diag",
            Preconditioner::Fixed(_) => "fixed",
        }
    }
}

/// `rho_k = min(rho0 * c^k, rho_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub rho0: f64,
    pub c: f64,
    pub rho_max: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            c: 2.0,
            rho_max: 1e12,
        }
    }
}

impl PenaltySchedule {
    pub fn fixed(rho: f64) -> Self {
        Self {
            rho0: rho,
            c: 1.0,
            rho_max: rho.max(1e12),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(SolverError::InvalidConfig(format!(
                "rho0 must be positive, got {}",
                self.rho0
            )));
        }
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(SolverError::InvalidConfig(format!(
                "c must be at least 1, got {}",
                self.c
            )));
        }
        if !(self.rho_max >= self.rho0) {
            return Err(SolverError::InvalidConfig(format!(
                "rho_max {} is below rho0 {}",
                self.rho_max, self.rho0
            )));
        }
        Ok(())
    }

    pub fn rho(&self, k: usize) -> f64 {
        // iterate instead of powi so the cap is hit without overflow
        let mut rho = self.rho0;
        for _ in 0..k {
            if rho >= self.rho_max {
                break;
            }
            rho *= self.c;
        }
        rho.min(self.rho_max)
    }
}

/// Armijo backtracking parameters for damped Newton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backtracking {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for Backtracking {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            beta: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub precond: Preconditioner,
    pub schedule: PenaltySchedule,
    /// The constant `L`; every step is scaled by `1/L`.
    pub step_l: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub backtracking: Backtracking,
    /// Optimal value used for gaps and Lyapunov values. Falls back to the
    /// model's known optimum when absent.
    pub f_star: Option<f64>,
    /// Record wall-clock time per iterate. Off by default so traces are
    /// reproducible byte for byte.
    pub record_timing: bool,
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            precond: Preconditioner::Identity,
            schedule: PenaltySchedule::default(),
            step_l: 1.0,
            max_iters: 500,
            grad_tol: 1e-8,
            backtracking: Backtracking::default(),
            f_star: None,
            record_timing: false,
        }
    }

    /// Uses the model's relative smoothness constant as `L` when known.
    pub fn for_model<M: Objective + ?Sized>(method: Method, model: &M) -> Self {
        let mut cfg = Self::new(method);
        if let Some((l, _)) = model.relative_constants() {
            cfg.step_l = l;
        }
        cfg
    }

    pub fn with_precond(mut self, precond: Preconditioner) -> Self {
        self.precond = precond;
        self
    }

    pub fn with_schedule(mut self, schedule: PenaltySchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_step_l(mut self, l: f64) -> Self {
        self.step_l = l;
        self
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn with_grad_tol(mut self, tol: f64) -> Self {
        self.grad_tol = tol;
        self
    }

    pub fn with_f_star(mut self, f_star: f64) -> Self {
        self.f_star = Some(f_star);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(SolverError::InvalidConfig(
                "grad_tol must be positive".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(SolverError::InvalidConfig(
                "max_iters must be at least 1".into(),
            ));
        }
        if !(self.step_l > 0.0 && self.step_l.is_finite()) {
            return Err(SolverError::InvalidConfig(format!(
                "step L must be positive, got {}",
                self.step_l
            )));
        }
        let bt = self.backtracking;
        if !(bt.alpha > 0.0 && bt.alpha <= 0.5 && bt.beta > 0.0 && bt.beta < 1.0) {
            return Err(SolverError::InvalidConfig(format!(
                "backtracking needs 0 < alpha <= 1/2 and 0 < beta < 1, got ({}, {})",
                bt.alpha, bt.beta
            )));
        }
        self.schedule.validate()
    }
}

/// One iterate of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub x: Vector,
    pub f: f64,
    pub grad_norm: f64,
    /// Penalty applied on the step leaving this iterate; zero for methods
    /// without a penalty.
    pub rho: f64,
    /// `‖x_k − x_{k−1}‖_{G_k}`, zero for the first record.
    pub step_norm_g: f64,
    /// `f(x_k) − f* + (L/2ρ_k)‖x_k − x_{k−1}‖²_{G_k}` when `f*` is known.
    pub lyapunov: Option<f64>,
    pub elapsed_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateTrace {
    pub method: Method,
    pub records: Vec<IterateRecord>,
    pub termination: Termination,
    pub f_star: Option<f64>,
}

impl IterateTrace {
    pub fn last(&self) -> &IterateRecord {
        self.records
            .last()
            .expect("traces hold at least one record")
    }

    pub fn final_x(&self) -> &Vector {
        &self.last().x
    }

    /// Number of update steps taken.
    pub fn steps(&self) -> usize {
        let seeds = if self.method == Method::Anm { 2 } else { 1 };
        self.records.len().saturating_sub(seeds)
    }

    /// First record index whose gradient norm is at most `tol`.
    pub fn first_below(&self, tol: f64) -> Option<usize> {
        self.records.iter().position(|r| r.grad_norm <= tol)
    }

    pub fn gap(&self, record: &IterateRecord) -> Option<f64> {
        self.f_star.map(|fs| record.f - fs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_caps_and_is_monotone() {
        let s = PenaltySchedule {
            rho0: 1.0,
            c: 10.0,
            rho_max: 1e3,
        };
        let rhos: Vec<f64> = (0..6).map(|k| s.rho(k)).collect();
        assert_eq!(rhos, vec![1.0, 10.0, 100.0, 1000.0, 1000.0, 1000.0]);
        let s = PenaltySchedule::default();
        assert_eq!(s.rho(10_000), 1e12);
        assert!((0..100).all(|k| s.rho(k) <= s.rho(k + 1)));
    }

    #[test]
    fn schedule_validation() {
        assert!(PenaltySchedule {
            rho0: 0.0,
            c: 2.0,
            rho_max: 1.0
        }
        .validate()
        .is_err());
        assert!(PenaltySchedule {
            rho0: 1.0,
            c: 0.5,
            rho_max: 1.0
        }
        .validate()
        .is_err());
        assert!(PenaltySchedule {
            rho0: 2.0,
            c: 1.0,
            rho_max: 1.0
        }
        .validate()
        .is_err());
        assert!(PenaltySchedule::fixed(3.0).validate().is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(Method::Pnm).validate().is_ok());
        assert!(SolverConfig::new(Method::Pnm)
            .with_max_iters(0)
            .validate()
            .is_err());
        assert!(SolverConfig::new(Method::Pnm)
            .with_grad_tol(0.0)
            .validate()
            .is_err());
        let mut c = SolverConfig::new(Method::DampedNewton);
        c.backtracking.alpha = 0.7;
        assert!(c.validate().is_err());
    }

    #[test]
    fn preconditioner_realization() {
        let h = SymMatrix::from_row_slice(2, &[4.0, 1.0, 1.0, 3.0]).unwrap();
        let g = Preconditioner::HessianDiagonal.realize(&h).unwrap();
        assert_eq!(g.diagonal().as_slice(), &[4.0, 3.0]);
        assert_eq!(g.as_matrix()[(0, 1)], 0.0);
        let bad = SymMatrix::from_row_slice(2, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            Preconditioner::HessianDiagonal.realize(&bad),
            Err(SolverError::NonPositiveDiagonal { index: 0, .. })
        ));
        assert!(Preconditioner::fixed(SymMatrix::from_diagonal(&[1.0, -1.0]).unwrap()).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            Method::Newton,
            Method::DampedNewton,
            Method::Pnm,
            Method::Anm,
        ] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("bfgs".parse::<Method>().is_err());
    }
}
