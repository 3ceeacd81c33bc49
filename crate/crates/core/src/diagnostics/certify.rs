//! Per-iteration contraction certificates for PNM and ANM traces.
//!
//! The rate constants are defined over a level set that cannot be computed,
//! so each step is certified with the quantities at its own iterate: for PNM
//! `η_k = mu ξ(x_k)(β_k + ρ_k)/(ρ_k L)` and
//! `f(x_{k+1}) − f* ≤ (1 − η_k)(f(x_k) − f*)`; for ANM
//! `𝒱_{k+1} ≤ (1 − ξ(x_k) mu/L) 𝒱_k`, both Lyapunov values taken with the
//! `ρ_k` and `G_k` of that step. Running minima of `ξ` and `β` are reported
//! alongside.

use serde::{Deserialize, Serialize};

use super::{
    compute_beta, compute_k, compute_xi, lyapunov, momentum_in_range, DiagnosticsError, Result,
};
use crate::linalg::DEFAULT_RANK_TOL;
use crate::objective::Objective;
use crate::solvers::{IterateTrace, Preconditioner};

/// Absolute slack allowed on every contraction inequality.
pub const CERTIFICATE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// `f` gap contraction along a PNM trace.
    PnmRate,
    /// Lyapunov contraction along an ANM trace.
    AnmLyapunov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionEntry {
    pub k: usize,
    pub rho: f64,
    /// Gap (PNM) or Lyapunov value (ANM) at iterate `k`.
    pub current: f64,
    /// The same quantity after the step.
    pub next: f64,
    /// `next / current` when `current > 0`.
    pub ratio: Option<f64>,
    /// Contraction factor `1 − η_k` or `1 − ξ mu/L`.
    pub bound: f64,
    pub xi: f64,
    pub beta: Option<f64>,
    pub eta: Option<f64>,
    /// `bound * current + slack − next`; negative means violated.
    pub slack: f64,
    pub satisfied: bool,
    /// The bound carries no information (`η ∉ (0, 1]` or factor `≥ 1`).
    pub vacuous: bool,
    /// For ANM: `H ≻ 0` or `G(x_k − x_{k−1}) ∈ Range(H)` held at `x_k`.
    pub range_assumption: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub kind: CertificateKind,
    pub f_star: f64,
    pub mu: f64,
    #[serde(rename = "L")]
    pub step_l: f64,
    pub entries: Vec<ContractionEntry>,
    /// Smallest slack over non-vacuous entries.
    pub worst_slack: Option<f64>,
    pub fraction_satisfied: f64,
    pub vacuous_count: usize,
    /// Every entry is satisfied or flagged vacuous.
    pub certified: bool,
    pub xi_min: Option<f64>,
    pub beta_min: Option<f64>,
    /// ANM only: the Lyapunov values never increase beyond the slack.
    pub lyapunov_nonincreasing: Option<bool>,
}

impl ContractionReport {
    fn assemble(
        kind: CertificateKind,
        f_star: f64,
        mu: f64,
        step_l: f64,
        entries: Vec<ContractionEntry>,
    ) -> Self {
        let worst_slack = entries
            .iter()
            .filter(|e| !e.vacuous)
            .map(|e| e.slack)
            .min_by(f64::total_cmp);
        let fraction_satisfied = if entries.is_empty() {
            1.0
        } else {
            entries.iter().filter(|e| e.satisfied).count() as f64 / entries.len() as f64
        };
        let vacuous_count = entries.iter().filter(|e| e.vacuous).count();
        let certified = entries.iter().all(|e| e.satisfied || e.vacuous);
        let xi_min = entries.iter().map(|e| e.xi).min_by(f64::total_cmp);
        let beta_min = entries.iter().filter_map(|e| e.beta).min_by(f64::total_cmp);
        let lyapunov_nonincreasing = (kind == CertificateKind::AnmLyapunov).then(|| {
            entries
                .iter()
                .all(|e| e.next <= e.current + CERTIFICATE_SLACK)
        });
        Self {
            kind,
            f_star,
            mu,
            step_l,
            entries,
            worst_slack,
            fraction_satisfied,
            vacuous_count,
            certified,
            xi_min,
            beta_min,
            lyapunov_nonincreasing,
        }
    }

    /// Certified with no vacuous entry, i.e. every `η_k ∈ (0, 1]`.
    pub fn fully_informative(&self) -> bool {
        self.certified && self.vacuous_count == 0
    }
}

fn resolve_f_star<M: Objective + ?Sized>(trace: &IterateTrace, model: &M) -> Result<f64> {
    trace
        .f_star
        .or_else(|| model.known_optimum().map(|o| o.value))
        .ok_or(DiagnosticsError::MissingOptimum)
}

fn ratio(next: f64, current: f64) -> Option<f64> {
    (current > 0.0).then(|| next / current)
}

/// Certifies `f(x_{k+1}) − f* ≤ (1 − η_k)(f(x_k) − f*) + 1e-12` for every
/// step of a PNM trace.
pub fn certify_pnm_rate<M: Objective + ?Sized>(
    trace: &IterateTrace,
    model: &M,
    precond: &Preconditioner,
    mu: f64,
    step_l: f64,
) -> Result<ContractionReport> {
    let f_star = resolve_f_star(trace, model)?;
    let mut entries = Vec::with_capacity(trace.records.len().saturating_sub(1));
    for pair in trace.records.windows(2) {
        let (cur, nxt) = (&pair[0], &pair[1]);
        if !(cur.rho > 0.0) {
            return Err(DiagnosticsError::MissingPenalty {
                k: cur.k,
                rho: cur.rho,
            });
        }
        let rho = cur.rho;
        let h = model.hessian(&cur.x);
        let g = precond.realize(&h)?;
        let k_mat = compute_k(&h, &g, rho)?;
        let xi = compute_xi(&h, &g, rho, DEFAULT_RANK_TOL)?;
        let beta = compute_beta(&k_mat, &g)?;
        let eta = mu * xi * (beta + rho) / (rho * step_l);
        let vacuous = !(eta > 0.0 && eta <= 1.0);
        let bound = 1.0 - eta;
        let current = model.value(&cur.x) - f_star;
        let next = model.value(&nxt.x) - f_star;
        let slack = bound * current + CERTIFICATE_SLACK - next;
        entries.push(ContractionEntry {
            k: cur.k,
            rho,
            current,
            next,
            ratio: ratio(next, current),
            bound,
            xi,
            beta: Some(beta),
            eta: Some(eta),
            slack,
            satisfied: slack >= 0.0,
            vacuous,
            range_assumption: None,
        });
    }
    Ok(ContractionReport::assemble(
        CertificateKind::PnmRate,
        f_star,
        mu,
        step_l,
        entries,
    ))
}

/// Certifies `𝒱_{k+1}(ρ_k) ≤ (1 − ξ(x_k) mu/L) 𝒱_k(ρ_k) + 1e-12` for every
/// step of an ANM trace (records `k ≥ 1` with a successor).
pub fn certify_anm_lyapunov<M: Objective + ?Sized>(
    trace: &IterateTrace,
    model: &M,
    precond: &Preconditioner,
    mu: f64,
    step_l: f64,
) -> Result<ContractionReport> {
    if trace.records.len() < 2 {
        return Err(DiagnosticsError::TraceTooShort(
            "ANM traces start from two points",
        ));
    }
    let f_star = resolve_f_star(trace, model)?;
    let mut entries = Vec::with_capacity(trace.records.len().saturating_sub(2));
    for triple in trace.records.windows(3) {
        let (prev, cur, nxt) = (&triple[0], &triple[1], &triple[2]);
        if !(cur.rho > 0.0) {
            return Err(DiagnosticsError::MissingPenalty {
                k: cur.k,
                rho: cur.rho,
            });
        }
        let rho = cur.rho;
        let h = model.hessian(&cur.x);
        let g = precond.realize(&h)?;
        let xi = compute_xi(&h, &g, rho, DEFAULT_RANK_TOL)?;
        let f_cur = model.value(&cur.x);
        let f_next = model.value(&nxt.x);
        let current = lyapunov(f_cur, f_star, &cur.x, &prev.x, &g, rho, step_l)?;
        let next = lyapunov(f_next, f_star, &nxt.x, &cur.x, &g, rho, step_l)?;
        let bound = 1.0 - xi * mu / step_l;
        let vacuous = !(bound > 0.0 && bound < 1.0);
        let slack = bound * current + CERTIFICATE_SLACK - next;
        let in_range = momentum_in_range(&(&cur.x - &prev.x), &h, &g)?;
        entries.push(ContractionEntry {
            k: cur.k,
            rho,
            current,
            next,
            ratio: ratio(next, current),
            bound,
            xi,
            beta: None,
            eta: None,
            slack,
            satisfied: slack >= 0.0,
            vacuous,
            range_assumption: Some(in_range),
        });
    }
    Ok(ContractionReport::assemble(
        CertificateKind::AnmLyapunov,
        f_star,
        mu,
        step_l,
        entries,
    ))
}
