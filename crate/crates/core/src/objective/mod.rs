//! Objective functions: the evaluation trait used by every solver, a dense
//! quadratic, the regularized GLM family and finite-difference oracles.

mod glm;

pub use glm::{GlmProblem, Link, RelativeConstants};

use crate::linalg::{weighted_norm_sq, LinalgError, SymMatrix, Vector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("bad shape: {0}")]
    BadShape(String),
    #[error("logistic label {value} at sample {index} is not -1 or +1")]
    BadLabel { index: usize, value: f64 },
    #[error("regularization must be positive and finite, got {0}")]
    BadRegularization(f64),
    #[error("data matrix has non-finite entries")]
    NonFinite,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A minimizer together with its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: Vector,
    pub value: f64,
}

/// Twice-differentiable objective over `R^n`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn hessian(&self, x: &Vector) -> SymMatrix;

    /// Relative smoothness and relative convexity constants `(L, mu)`, when
    /// known in closed form.
    fn relative_constants(&self) -> Option<(f64, f64)> {
        None
    }

    fn known_optimum(&self) -> Option<Optimum> {
        None
    }
}

/// `f(x) = ½ xᵀQx − bᵀx` with symmetric PSD `Q`.
///
/// Quadratics satisfy both relative bounds with equality, so `L = mu = 1`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    q: SymMatrix,
    b: Vector,
    optimum: Option<Optimum>,
}

impl Quadratic {
    pub fn new(q: SymMatrix, b: Vector) -> Result<Self, ObjectiveError> {
        if q.order() != b.len() {
            return Err(ObjectiveError::BadShape(format!(
                "Q is {n}x{n} but b has length {}",
                b.len(),
                n = q.order()
            )));
        }
        let optimum = crate::linalg::spd_solve(&q, &b).ok().map(|x| {
            let value = -0.5 * b.dot(&x);
            Optimum { x, value }
        });
        Ok(Self { q, b, optimum })
    }

    /// `½‖x‖²`.
    pub fn isotropic(n: usize) -> Self {
        Self::new(SymMatrix::identity(n), Vector::zeros(n)).expect("shapes agree")
    }

    /// Tridiagonal `Q` (2 on the diagonal, −1 off it) with `b = 1`.
    pub fn laplacian(n: usize) -> Self {
        let q = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        });
        Self::new(
            SymMatrix::new(q).expect("symmetric"),
            Vector::from_element(n, 1.0),
        )
        .expect("shapes agree")
    }

    pub fn q(&self) -> &SymMatrix {
        &self.q
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&self.q.mul_vec(x)) - self.b.dot(x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.q.mul_vec(x) - &self.b
    }

    fn hessian(&self, _x: &Vector) -> SymMatrix {
        self.q.clone()
    }

    fn relative_constants(&self) -> Option<(f64, f64)> {
        Some((1.0, 1.0))
    }

    fn known_optimum(&self) -> Option<Optimum> {
        self.optimum.clone()
    }
}

/// Default finite-difference step `1e-6 * (1 + ‖x‖)`.
pub fn default_fd_step(x: &Vector) -> f64 {
    1e-6 * (1.0 + x.norm())
}

/// Central-difference gradient of `model.value`.
pub fn fd_gradient<M: Objective + ?Sized>(model: &M, x: &Vector, h: Option<f64>) -> Vector {
    let h = h.unwrap_or_else(|| default_fd_step(x));
    let mut probe = x.clone();
    Vector::from_fn(x.len(), |i, _| {
        let xi = probe[i];
        probe[i] = xi + h;
        let up = model.value(&probe);
        probe[i] = xi - h;
        let down = model.value(&probe);
        probe[i] = xi;
        (up - down) / (2.0 * h)
    })
}

/// Central differences of the analytic gradient, symmetrized.
pub fn fd_hessian<M: Objective + ?Sized>(model: &M, x: &Vector, h: Option<f64>) -> SymMatrix {
    let h = h.unwrap_or_else(|| default_fd_step(x));
    let n = x.len();
    let mut cols = nalgebra::DMatrix::zeros(n, n);
    let mut probe = x.clone();
    for i in 0..n {
        let xi = probe[i];
        probe[i] = xi + h;
        let up = model.gradient(&probe);
        probe[i] = xi - h;
        let down = model.gradient(&probe);
        probe[i] = xi;
        cols.set_column(i, &((up - down) / (2.0 * h)));
    }
    SymMatrix::symmetrized(cols).expect("finite differences of a finite gradient")
}

/// Outcome of checking the relative smoothness/convexity sandwich at a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeBoundCheck {
    pub ok_upper: bool,
    pub ok_lower: bool,
    /// `(L/2)‖x−y‖²_{H(y)} − D(x, y)`; negative means violated.
    pub slack_upper: f64,
    /// `D(x, y) − (mu/2)‖x−y‖²_{H(y)}`; negative means violated.
    pub slack_lower: f64,
}

const RELATIVE_BOUND_SLACK: f64 = 1e-9;

/// Compares the Bregman gap `D(x, y) = f(x) − f(y) − ⟨∇f(y), x − y⟩`
/// against `L/2` and `mu/2` times `‖x − y‖²` in the Hessian norm at `y`.
pub fn check_relative_bounds<M: Objective + ?Sized>(
    model: &M,
    x: &Vector,
    y: &Vector,
    l: f64,
    mu: f64,
) -> RelativeBoundCheck {
    let d = x - y;
    let gap = model.value(x) - model.value(y) - model.gradient(y).dot(&d);
    let curv = weighted_norm_sq(&d, &model.hessian(y));
    let slack_upper = 0.5 * l * curv - gap;
    let slack_lower = gap - 0.5 * mu * curv;
    RelativeBoundCheck {
        ok_upper: slack_upper >= -RELATIVE_BOUND_SLACK,
        ok_lower: slack_lower >= -RELATIVE_BOUND_SLACK,
        slack_upper,
        slack_lower,
    }
}

/// Sublevel set of `f(x) + (L/2ρ)‖x − y‖²_G` anchored at the initial pair.
#[derive(Debug, Clone)]
pub struct LevelSet {
    pub l: f64,
    pub rho: f64,
    pub g: SymMatrix,
    pub threshold: f64,
}

impl LevelSet {
    pub fn anchored<M: Objective + ?Sized>(
        model: &M,
        x0: &Vector,
        y0: &Vector,
        l: f64,
        rho: f64,
        g: SymMatrix,
    ) -> Self {
        let threshold = model.value(x0) + l / (2.0 * rho) * weighted_norm_sq(&(x0 - y0), &g);
        Self {
            l,
            rho,
            g,
            threshold,
        }
    }

    pub fn level<M: Objective + ?Sized>(&self, model: &M, x: &Vector, y: &Vector) -> f64 {
        model.value(x) + self.l / (2.0 * self.rho) * weighted_norm_sq(&(x - y), &self.g)
    }

    pub fn contains<M: Objective + ?Sized>(&self, model: &M, x: &Vector, y: &Vector) -> bool {
        self.level(model, x, y) <= self.threshold + 1e-9
    }
}
