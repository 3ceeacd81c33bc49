//! Spectral objects of the penalty/augmented steps and numerical checks of
//! the inequalities behind the linear rates.
//!
//! With `K(x) = ((1/ρ)G + H(x))⁻¹` and
//! `𝐋(x) = H^{1/2}((1/ρ)I + H^{1/2}G⁻¹H^{1/2})⁻¹H^{1/2}`, the quantities here
//! are
//!
//! * `ξ(x)`: smallest nonzero eigenvalue of `H^{1/2} K H^{1/2}`, which equals
//!   `ρλ/(1 + ρλ)` for the smallest nonzero eigenvalue `λ` of `G^{-1/2} H G^{-1/2}`;
//! * `β(x) = λ_min(K^{1/2} G K^{1/2})`;
//! * `Θ(x) = (1/ρ) K G`, the momentum matrix of the augmented step.
//!
//! Everything is a dense O(n³) computation meant for verification runs.

mod certify;

pub use certify::{
    certify_anm_lyapunov, certify_pnm_rate, CertificateKind, ContractionEntry, ContractionReport,
    CERTIFICATE_SLACK,
};

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{
    pd_inv_sqrt, pinv, pinv_apply, psd_sqrt, spd_inverse, sym_eig, weighted_norm_sq, LinalgError,
    Matrix, SymMatrix, Vector, DEFAULT_RANK_TOL,
};
use crate::objective::Objective;
use crate::solvers::SolverError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("Hessian is numerically zero; xi is undefined on an empty range")]
    ZeroHessian,
    #[error("optimal value f* is not available")]
    MissingOptimum,
    #[error("f* = {f_star} exceeds f(x) = {f_x}")]
    OptimumAboveValue { f_x: f64, f_star: f64 },
    #[error(
        "neither H is positive definite nor G(x − x_prev) in Range(H) (residual {residual:e})"
    )]
    RangeAssumption { residual: f64 },
    #[error("trace too short: {0}")]
    TraceTooShort(&'static str),
    #[error("record {k} has non-positive penalty {rho}")]
    MissingPenalty { k: usize, rho: f64 },
}

pub type Result<T> = std::result::Result<T, DiagnosticsError>;

/// `K = ((1/ρ)G + H)⁻¹` by Cholesky inversion.
pub fn compute_k(h: &SymMatrix, g: &SymMatrix, rho: f64) -> Result<SymMatrix> {
    Ok(spd_inverse(&SymMatrix::shifted(h, g, rho))?)
}

/// `𝐋 = H^{1/2}((1/ρ)I + H^{1/2}G⁻¹H^{1/2})⁻¹H^{1/2}`.
pub fn compute_lmat(h: &SymMatrix, g: &SymMatrix, rho: f64) -> Result<SymMatrix> {
    let s = psd_sqrt(h)?;
    let g_inv = spd_inverse(g)?;
    let n = h.order();
    let mut inner = s.as_matrix() * g_inv.as_matrix() * s.as_matrix();
    for i in 0..n {
        inner[(i, i)] += 1.0 / rho;
    }
    let inner_inv = spd_inverse(&SymMatrix::symmetrized(inner)?)?;
    Ok(SymMatrix::symmetrized(
        s.as_matrix() * inner_inv.as_matrix() * s.as_matrix(),
    )?)
}

/// `G^{-1/2} H G^{-1/2}`.
pub fn whitened_hessian(h: &SymMatrix, g: &SymMatrix) -> Result<SymMatrix> {
    let w = pd_inv_sqrt(g)?;
    Ok(SymMatrix::symmetrized(
        w.as_matrix() * h.as_matrix() * w.as_matrix(),
    )?)
}

/// `H^{1/2} K H^{1/2}`.
pub fn resolvent_sandwich(h: &SymMatrix, k: &SymMatrix) -> Result<SymMatrix> {
    let s = psd_sqrt(h)?;
    Ok(SymMatrix::symmetrized(
        s.as_matrix() * k.as_matrix() * s.as_matrix(),
    )?)
}

fn xi_map(rho: f64, lambda: f64) -> f64 {
    rho * lambda / (1.0 + rho * lambda)
}

/// `ξ = ρλ⁺_min/(1 + ρλ⁺_min)` with `λ⁺_min` taken from `G^{-1/2} H G^{-1/2}`.
pub fn compute_xi(h: &SymMatrix, g: &SymMatrix, rho: f64, rank_tol: f64) -> Result<f64> {
    let eig = sym_eig(&whitened_hessian(h, g)?)?;
    let lambda = eig
        .nonzero_eigenvalues(rank_tol)
        .first()
        .copied()
        .filter(|&l| l > 0.0)
        .ok_or(DiagnosticsError::ZeroHessian)?;
    Ok(xi_map(rho, lambda))
}

/// `ξ` as the smallest nonzero eigenvalue of `H^{1/2} K H^{1/2}`; an
/// independent route to the same number as [`compute_xi`].
pub fn xi_from_resolvent(h: &SymMatrix, g: &SymMatrix, rho: f64, rank_tol: f64) -> Result<f64> {
    let k = compute_k(h, g, rho)?;
    let eig = sym_eig(&resolvent_sandwich(h, &k)?)?;
    eig.nonzero_eigenvalues(rank_tol)
        .first()
        .copied()
        .filter(|&l| l > 0.0)
        .ok_or(DiagnosticsError::ZeroHessian)
}

/// `λ_min(K^{1/2} G K^{1/2})`.
pub fn compute_beta(k: &SymMatrix, g: &SymMatrix) -> Result<f64> {
    let s = psd_sqrt(k)?;
    let m = SymMatrix::symmetrized(s.as_matrix() * g.as_matrix() * s.as_matrix())?;
    Ok(sym_eig(&m)?.lambda_min())
}

/// `Θ = (1/ρ)((1/ρ)G + H)⁻¹G`; not symmetric in general.
pub fn momentum_matrix(h: &SymMatrix, g: &SymMatrix, rho: f64) -> Result<Matrix> {
    let k = compute_k(h, g, rho)?;
    Ok(k.as_matrix() * g.as_matrix() / rho)
}

/// Snapshot of every spectral quantity at one iterate.
#[derive(Debug, Clone)]
pub struct SpectralDiagnostics {
    pub k: SymMatrix,
    pub lmat: SymMatrix,
    pub xi: f64,
    pub beta: f64,
    pub theta: Matrix,
    pub rho: f64,
    pub at_x: Vector,
}

impl SpectralDiagnostics {
    pub fn at<M: Objective + ?Sized>(
        model: &M,
        x: &Vector,
        g: &SymMatrix,
        rho: f64,
    ) -> Result<Self> {
        let h = model.hessian(x);
        let k = compute_k(&h, g, rho)?;
        Ok(Self {
            lmat: compute_lmat(&h, g, rho)?,
            xi: compute_xi(&h, g, rho, DEFAULT_RANK_TOL)?,
            beta: compute_beta(&k, g)?,
            theta: k.as_matrix() * g.as_matrix() / rho,
            k,
            rho,
            at_x: x.clone(),
        })
    }
}

/// Residuals of `HK = I − (1/ρ)GK` and `GKG = ρG − ρ𝐋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftIdentityCheck {
    pub hk_residual: f64,
    pub gkg_residual: f64,
    /// `gkg_residual / max(1, ρ‖G‖_F)`, relative to the size of the terms.
    pub gkg_relative: f64,
    pub holds: bool,
}

/// Checks both shift identities with `K` and `𝐋` computed from `(H, G, ρ)`.
pub fn check_shift_identities(
    h: &SymMatrix,
    g: &SymMatrix,
    rho: f64,
    tol: f64,
) -> Result<ShiftIdentityCheck> {
    let k = compute_k(h, g, rho)?;
    let lmat = compute_lmat(h, g, rho)?;
    Ok(check_shift_identities_with(h, g, rho, &k, &lmat, tol))
}

/// Same as [`check_shift_identities`] but with caller-supplied `K` and `𝐋`.
///
/// The first residual is compared with `tol` directly. Both sides of the
/// second identity are of size `ρ‖G‖`, and a backward error `E` in `H`
/// moves `GKG` by about `ρ²‖E‖` on the null space of `H`, so that residual
/// is compared relative to `max(1, ρ‖G‖_F)`.
pub fn check_shift_identities_with(
    h: &SymMatrix,
    g: &SymMatrix,
    rho: f64,
    k: &SymMatrix,
    lmat: &SymMatrix,
    tol: f64,
) -> ShiftIdentityCheck {
    let n = h.order();
    let (h, g, k, l) = (
        h.as_matrix(),
        g.as_matrix(),
        k.as_matrix(),
        lmat.as_matrix(),
    );
    let gk = g * k;
    let hk_residual = (h * k - (Matrix::identity(n, n) - &gk / rho)).norm();
    let gkg_residual = (&gk * g - g * rho + l * rho).norm();
    let gkg_relative = gkg_residual / (rho * g.norm()).max(1.0);
    ShiftIdentityCheck {
        hk_residual,
        gkg_residual,
        gkg_relative,
        holds: hk_residual <= tol && gkg_relative <= tol,
    }
}

/// Nonzero spectra of `H^{1/2}KH^{1/2}` and `G^{-1/2}𝐋G^{-1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumCheck {
    pub resolvent: Vec<f64>,
    pub whitened_lmat: Vec<f64>,
    pub max_difference: f64,
    pub holds: bool,
}

/// Both matrices must carry the same sorted nonzero eigenvalues within `tol`.
pub fn check_shared_spectrum(
    h: &SymMatrix,
    g: &SymMatrix,
    rho: f64,
    rank_tol: f64,
    tol: f64,
) -> Result<SpectrumCheck> {
    let k = compute_k(h, g, rho)?;
    let lmat = compute_lmat(h, g, rho)?;
    let resolvent = sym_eig(&resolvent_sandwich(h, &k)?)?.nonzero_eigenvalues(rank_tol);
    let w = pd_inv_sqrt(g)?;
    let wl = SymMatrix::symmetrized(w.as_matrix() * lmat.as_matrix() * w.as_matrix())?;
    let whitened_lmat = sym_eig(&wl)?.nonzero_eigenvalues(rank_tol);
    let same_len = resolvent.len() == whitened_lmat.len();
    let max_difference = if same_len {
        resolvent
            .iter()
            .zip(&whitened_lmat)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(SpectrumCheck {
        resolvent,
        whitened_lmat,
        max_difference,
        holds: same_len && max_difference <= tol,
    })
}

/// `ρλ/(1 + ρλ)` for every nonzero eigenvalue of `G^{-1/2} H G^{-1/2}`,
/// ascending.
pub fn predicted_resolvent_spectrum(
    h: &SymMatrix,
    g: &SymMatrix,
    rho: f64,
    rank_tol: f64,
) -> Result<Vec<f64>> {
    let eig = sym_eig(&whitened_hessian(h, g)?)?;
    Ok(eig
        .nonzero_eigenvalues(rank_tol)
        .into_iter()
        .map(|l| xi_map(rho, l))
        .collect())
}

/// `lhs ≥ rhs − tol` style inequality with its slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs − rhs`.
    pub slack: f64,
    pub xi: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64, xi: f64, tol: f64) -> Self {
        let slack = lhs - rhs;
        Self {
            lhs,
            rhs,
            slack,
            xi,
            holds: slack >= -tol,
        }
    }
}

/// `‖∇f‖²_K ≥ ξ(x)‖∇f‖²_{H†}`.
pub fn check_gradient_bound<M: Objective + ?Sized>(
    model: &M,
    x: &Vector,
    g: &SymMatrix,
    rho: f64,
    tol: f64,
) -> Result<InequalityCheck> {
    let h = model.hessian(x);
    let grad = model.gradient(x);
    if grad.iter().all(|&v| v == 0.0) {
        let xi = compute_xi(&h, g, rho, DEFAULT_RANK_TOL).unwrap_or(0.0);
        return Ok(InequalityCheck::new(0.0, 0.0, xi, tol));
    }
    let k = compute_k(&h, g, rho)?;
    let xi = compute_xi(&h, g, rho, DEFAULT_RANK_TOL)?;
    let lhs = weighted_norm_sq(&grad, &k);
    let rhs = xi * grad.dot(&pinv_apply(&h, &grad, DEFAULT_RANK_TOL)?);
    Ok(InequalityCheck::new(lhs, rhs, xi, tol))
}

/// Checks that the momentum term is admissible: `H ≻ 0` or
/// `G(x − x_prev) ∈ Range(H)`.
pub fn momentum_in_range(d: &Vector, h: &SymMatrix, g: &SymMatrix) -> Result<bool> {
    let eig = sym_eig(h)?;
    if eig.lambda_min() > DEFAULT_RANK_TOL * eig.lambda_max().max(0.0) && eig.lambda_min() > 0.0 {
        return Ok(true);
    }
    let gd = g.mul_vec(d);
    let proj = h.mul_vec(&pinv(h, DEFAULT_RANK_TOL)?.mul_vec(&gd));
    Ok((proj - &gd).norm() <= 1e-8 * gd.norm())
}

/// `‖x − x_prev‖²_𝐋 ≥ ξ(x)‖x − x_prev‖²_G`.
pub fn check_step_bound(
    x: &Vector,
    x_prev: &Vector,
    h: &SymMatrix,
    g: &SymMatrix,
    rho: f64,
    tol: f64,
) -> Result<InequalityCheck> {
    let d = x - x_prev;
    if !momentum_in_range(&d, h, g)? {
        let gd = g.mul_vec(&d);
        let residual = (h.mul_vec(&pinv_apply(h, &gd, DEFAULT_RANK_TOL)?) - &gd).norm();
        return Err(DiagnosticsError::RangeAssumption { residual });
    }
    if d.iter().all(|&v| v == 0.0) {
        let xi = compute_xi(h, g, rho, DEFAULT_RANK_TOL).unwrap_or(0.0);
        return Ok(InequalityCheck::new(0.0, 0.0, xi, tol));
    }
    let lmat = compute_lmat(h, g, rho)?;
    let xi = compute_xi(h, g, rho, DEFAULT_RANK_TOL)?;
    let lhs = weighted_norm_sq(&d, &lmat);
    let rhs = xi * weighted_norm_sq(&d, g);
    Ok(InequalityCheck::new(lhs, rhs, xi, tol))
}

/// `𝒱 = f(x) − f* + (L/2ρ)‖x − x_prev‖²_G`. Gaps within `1e-9` below zero
/// are clamped to zero.
pub fn lyapunov(
    f_x: f64,
    f_star: f64,
    x: &Vector,
    x_prev: &Vector,
    g: &SymMatrix,
    rho: f64,
    step_l: f64,
) -> Result<f64> {
    if f_star > f_x + 1e-9 {
        return Err(DiagnosticsError::OptimumAboveValue { f_x, f_star });
    }
    let gap = (f_x - f_star).max(0.0);
    Ok(gap + step_l / (2.0 * rho) * weighted_norm_sq(&(x - x_prev), g))
}
