//! Penalty and augmented Newton methods for unconstrained minimization.
//!
//! Both methods relax the Newton system `H(x_k)(x − x_k) = −(1/L)∇f(x_k)`:
//! the penalty Newton method (PNM) adds a quadratic penalty weighted by a
//! positive definite metric `G`, giving
//! `x_{k+1} = x_k − (1/L)((1/ρ)G + H)⁻¹∇f(x_k)`; the augmented Newton method
//! (ANM) keeps a multiplier estimate, which turns into a heavy-ball momentum
//! term `(1/ρ)((1/ρ)G + H)⁻¹G(x_k − x_{k−1})`. `G = I` and `G = diag(H)`
//! recover Levenberg and Levenberg-Marquardt, and `ρ → ∞` recovers Newton.
//!
//! * [`linalg`]: dense symmetric kernels.
//! * [`objective`]: the objective trait, quadratics and regularized GLMs.
//! * [`solvers`]: the iterations and their traces.
//! * [`diagnostics`]: spectral quantities and per-step rate certificates.

pub mod diagnostics;
pub mod linalg;
pub mod objective;
pub mod solvers;

pub use linalg::{SymMatrix, Vector};
pub use objective::{GlmProblem, Link, Objective, Optimum, Quadratic};
pub use solvers::{
    IterateRecord, IterateTrace, Method, PenaltySchedule, Preconditioner, SolverConfig,
};
