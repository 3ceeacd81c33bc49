use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Objective, ObjectiveError, Optimum};
use crate::linalg::{sym_eig, SymMatrix, Vector};

/// Per-sample loss `phi_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    /// `phi_i(t) = log(1 + exp(−y_i t))`, labels in {−1, +1} (default +1).
    Logistic,
    /// `phi_i(t) = ½ (t − y_i)²`, labels are real targets (default 0).
    Squared,
}

impl Link {
    /// Bounds `(u, l)` with `u ≤ phi''(t) ≤ l` for all `t`.
    pub fn curvature_bounds(self) -> (f64, f64) {
        match self {
            Link::Logistic => (0.0, 0.25),
            Link::Squared => (1.0, 1.0),
        }
    }

    fn derivatives(self, t: f64, y: f64) -> (f64, f64, f64) {
        match self {
            Link::Logistic => {
                let s = -y * t;
                let sig = sigmoid(s);
                (softplus(s), -y * sig, y * y * sig * (1.0 - sig))
            }
            Link::Squared => {
                let r = t - y;
                (0.5 * r * r, r, 1.0)
            }
        }
    }

    fn default_label(self) -> f64 {
        match self {
            Link::Logistic => 1.0,
            Link::Squared => 0.0,
        }
    }
}

impl std::str::FromStr for Link {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "logistic" => Ok(Link::Logistic),
            "squared" => Ok(Link::Squared),
            other => Err(format!(
                "unknown link `{other}` (expected logistic or squared)"
            )),
        }
    }
}

fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Closed-form relative constants of an ℓ₂-regularized GLM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeConstants {
    #[serde(rename = "L")]
    pub l: f64,
    pub mu: f64,
    pub u: f64,
    pub ell: f64,
    pub sigma_max_sq: f64,
}

impl RelativeConstants {
    /// `L = (ℓσ² + mα)/(uσ² + mα)` and its reciprocal for `mu`.
    pub fn from_parts(u: f64, ell: f64, sigma_max_sq: f64, m: usize, alpha: f64) -> Self {
        let reg = m as f64 * alpha;
        let top = ell * sigma_max_sq + reg;
        let bottom = u * sigma_max_sq + reg;
        Self {
            l: top / bottom,
            mu: bottom / top,
            u,
            ell,
            sigma_max_sq,
        }
    }
}

/// `f(x) = (1/m) Σ phi_i(a_iᵀx) + (α/2)‖x‖²` with `A = [a_1, …, a_m]` of
/// shape `n × m`.
#[derive(Debug)]
pub struct GlmProblem {
    a: DMatrix<f64>,
    link: Link,
    alpha: f64,
    labels: Vector,
    optimum: OnceLock<Optimum>,
}

impl Clone for GlmProblem {
    fn clone(&self) -> Self {
        let optimum = OnceLock::new();
        if let Some(o) = self.optimum.get() {
            let _ = optimum.set(o.clone());
        }
        Self {
            a: self.a.clone(),
            link: self.link,
            alpha: self.alpha,
            labels: self.labels.clone(),
            optimum,
        }
    }
}

impl GlmProblem {
    pub fn new(
        a: DMatrix<f64>,
        link: Link,
        alpha: f64,
        labels: Option<Vector>,
    ) -> Result<Self, ObjectiveError> {
        let (n, m) = a.shape();
        if n == 0 || m == 0 {
            return Err(ObjectiveError::BadShape(format!(
                "data matrix must be nonempty, got {n}x{m}"
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ObjectiveError::BadRegularization(alpha));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(ObjectiveError::NonFinite);
        }
        let labels = match labels {
            Some(y) => {
                if y.len() != m {
                    return Err(ObjectiveError::BadShape(format!(
                        "{} labels for {m} samples",
                        y.len()
                    )));
                }
                if let Some((index, &value)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                    return Err(ObjectiveError::BadLabel { index, value });
                }
                if link == Link::Logistic {
                    if let Some((index, &value)) =
                        y.iter().enumerate().find(|(_, &v)| v != 1.0 && v != -1.0)
                    {
                        return Err(ObjectiveError::BadLabel { index, value });
                    }
                }
                y
            }
            None => Vector::from_element(m, link.default_label()),
        };
        Ok(Self {
            a,
            link,
            alpha,
            labels,
            optimum: OnceLock::new(),
        })
    }

    pub fn features(&self) -> usize {
        self.a.nrows()
    }

    pub fn samples(&self) -> usize {
        self.a.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn labels(&self) -> &Vector {
        &self.labels
    }

    /// Computes `σ²_max(A)` from the largest eigenvalue of `AAᵀ` and plugs it
    /// into the closed form.
    pub fn constants(&self) -> RelativeConstants {
        let gram = SymMatrix::symmetrized(&self.a * self.a.transpose()).expect("finite data");
        let sigma_max_sq = sym_eig(&gram)
            .map(|e| e.lambda_max().max(0.0))
            // the eigensolver only fails on pathological input; fall back to the
            // Frobenius bound, which still yields valid (looser) constants
            .unwrap_or_else(|_| self.a.norm_squared());
        let (u, ell) = self.link.curvature_bounds();
        RelativeConstants::from_parts(u, ell, sigma_max_sq, self.samples(), self.alpha)
    }

    /// Stores the minimizer once. Returns `false` if one was already cached.
    pub fn set_optimum(&self, optimum: Optimum) -> bool {
        self.optimum.set(optimum).is_ok()
    }

    fn margins(&self, x: &Vector) -> Vector {
        self.a.tr_mul(x)
    }
}

impl Objective for GlmProblem {
    fn dim(&self) -> usize {
        self.features()
    }

    fn value(&self, x: &Vector) -> f64 {
        let t = self.margins(x);
        let loss: f64 = t
            .iter()
            .zip(self.labels.iter())
            .map(|(&t, &y)| self.link.derivatives(t, y).0)
            .sum();
        loss / self.samples() as f64 + 0.5 * self.alpha * x.norm_squared()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let t = self.margins(x);
        let d1 = Vector::from_iterator(
            t.len(),
            t.iter()
                .zip(self.labels.iter())
                .map(|(&t, &y)| self.link.derivatives(t, y).1),
        );
        &self.a * d1 / self.samples() as f64 + x * self.alpha
    }

    fn hessian(&self, x: &Vector) -> SymMatrix {
        let t = self.margins(x);
        let mut weighted = self.a.clone();
        for (j, mut col) in weighted.column_iter_mut().enumerate() {
            col *= self.link.derivatives(t[j], self.labels[j]).2;
        }
        let mut h = weighted * self.a.transpose() / self.samples() as f64;
        for i in 0..self.features() {
            h[(i, i)] += self.alpha;
        }
        SymMatrix::symmetrized(h).expect("finite Hessian")
    }

    fn relative_constants(&self) -> Option<(f64, f64)> {
        let c = self.constants();
        Some((c.l, c.mu))
    }

    fn known_optimum(&self) -> Option<Optimum> {
        self.optimum.get().cloned()
    }
}
