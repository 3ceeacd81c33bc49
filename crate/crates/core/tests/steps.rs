mod common;

use augnewton::linalg::{Matrix, SymMatrix, Vector};
use augnewton::objective::{GlmProblem, Link, Objective, Quadratic};
use augnewton::solvers::{
    anm_run, anm_run_dual, anm_step_dual, anm_step_momentum, augmented_levenberg_marquardt_step,
    augmented_levenberg_step, levenberg_marquardt_step, levenberg_step, newton_step, pnm_run,
    pnm_step, DualState, Method, PenaltySchedule, Preconditioner, SolverConfig,
};
use common::{gaussian_vec, glm, lu_inverse, rng};
use proptest::prelude::*;

fn state(seed: u64) -> (GlmProblem, Vector, Vector) {
    let n = 3 + (seed % 6) as usize;
    let link = if seed % 2 == 0 {
        Link::Logistic
    } else {
        Link::Squared
    };
    let f = glm(seed, n, 4 * n, link, 0.05);
    let mut r = rng(seed ^ 0xabcdef);
    let x = gaussian_vec(&mut r, n, 1.0);
    let x_prev = &x + gaussian_vec(&mut r, n, 0.3);
    (f, x, x_prev)
}

fn rel(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// `x − (ρH + G)⁻¹ ρ∇f / L`, written without the `1/ρ` scaling the crate uses.
fn penalty_oracle(x: &Vector, grad: &Vector, h: &Matrix, g: &Matrix, rho: f64, l: f64) -> Vector {
    x - lu_inverse(&(h * rho + g)) * grad * (rho / l)
}

/// `x − (ρH + G)⁻¹[ρ∇f/L − G(x − x_prev)]`.
fn momentum_oracle(
    x: &Vector,
    x_prev: &Vector,
    grad: &Vector,
    h: &Matrix,
    g: &Matrix,
    rho: f64,
    l: f64,
) -> Vector {
    x - lu_inverse(&(h * rho + g)) * (grad * (rho / l) - g * (x - x_prev))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn levenberg_variants_match_direct_formulas(seed in any::<u64>(), ri in 0usize..3) {
        let rho = [0.5, 2.0, 30.0][ri];
        let l = 1.3;
        let (f, x, x_prev) = state(seed);
        let n = f.dim();
        let grad = f.gradient(&x);
        let h = f.hessian(&x).into_matrix();
        let d = Matrix::from_diagonal(&h.diagonal());
        let eye = Matrix::identity(n, n);

        let lev = levenberg_step(&f, &x, rho, l).unwrap();
        prop_assert!(rel(&lev, &penalty_oracle(&x, &grad, &h, &eye, rho, l)) <= 1e-12);
        let lm = levenberg_marquardt_step(&f, &x, rho, l).unwrap();
        prop_assert!(rel(&lm, &penalty_oracle(&x, &grad, &h, &d, rho, l)) <= 1e-12);
        let alev = augmented_levenberg_step(&f, &x, &x_prev, rho, l).unwrap();
        prop_assert!(rel(&alev, &momentum_oracle(&x, &x_prev, &grad, &h, &eye, rho, l)) <= 1e-12);
        let alm = augmented_levenberg_marquardt_step(&f, &x, &x_prev, rho, l).unwrap();
        prop_assert!(rel(&alm, &momentum_oracle(&x, &x_prev, &grad, &h, &d, rho, l)) <= 1e-12);
    }

    #[test]
    fn anm_equals_penalty_step_plus_momentum(seed in any::<u64>()) {
        // x⁺ = x − (1/L)K∇f + (1/ρ)KG(x − x_prev)
        let (f, x, x_prev) = state(seed);
        let rho = 4.0;
        let g = SymMatrix::from_diagonal(&(0..f.dim()).map(|i| 1.0 + 0.1 * i as f64).collect::<Vec<_>>()).unwrap();
        let k = lu_inverse(&(g.as_matrix() / rho + f.hessian(&x).as_matrix()));
        let pnm = pnm_step(&f, &x, rho, &g, 1.0).unwrap();
        let anm = anm_step_momentum(&f, &x, &x_prev, rho, &g, 1.0).unwrap();
        let momentum = &k * g.as_matrix() * (&x - &x_prev) / rho;
        prop_assert!(rel(&anm, &(pnm + momentum)) <= 1e-12);
    }

    #[test]
    fn dual_and_momentum_steps_agree(seed in any::<u64>()) {
        let (f, x, x_prev) = state(seed);
        let g = SymMatrix::identity(f.dim());
        let dual = DualState::from_points(&x_prev, &x);
        let (a, d) = anm_step_dual(&f, &x, &dual, 3.0, &g, 1.2).unwrap();
        let b = anm_step_momentum(&f, &x, &x_prev, 3.0, &g, 1.2).unwrap();
        prop_assert!(rel(&a, &b) <= 1e-12);
        prop_assert!(((&x - &a) - &d.z).norm() <= 1e-12 * (1.0 + d.z.norm()));
    }

    #[test]
    fn large_penalty_recovers_newton(seed in any::<u64>()) {
        let (f, x, x_prev) = state(seed);
        let newton = newton_step(&f, &x, 1.0).unwrap();
        let g = SymMatrix::identity(f.dim());
        prop_assert!(rel(&pnm_step(&f, &x, 1e12, &g, 1.0).unwrap(), &newton) <= 1e-6);
        prop_assert!(rel(&anm_step_momentum(&f, &x, &x_prev, 1e12, &g, 1.0).unwrap(), &newton) <= 1e-6);
    }
}

#[test]
fn anm_traces_agree_across_forms() {
    for seed in 0..4u64 {
        let f = glm(100 + seed, 8, 40, Link::Logistic, 0.1);
        let (l, _) = f.relative_constants().unwrap();
        let cfg = SolverConfig::new(Method::Anm)
            .with_step_l(l)
            .with_schedule(PenaltySchedule::fixed(2.0))
            .with_precond(Preconditioner::HessianDiagonal)
            .with_max_iters(40)
            .with_grad_tol(1e-300);
        let x0 = Vector::from_element(8, 0.5);
        let a = anm_run(&f, &x0, &x0, &cfg).unwrap();
        let b = anm_run_dual(&f, &x0, &x0, &cfg).unwrap();
        assert_eq!(a.records.len(), b.trace.records.len());
        for (ra, rb) in a.records.iter().zip(&b.trace.records) {
            assert!((&ra.x - &rb.x).norm() <= 1e-10 * (1.0 + ra.x.norm()));
        }
        let xs: Vec<&Vector> = b.trace.records.iter().map(|r| &r.x).collect();
        for k in 1..xs.len() - 1 {
            let z = &b.multipliers[k + 1];
            assert!(((xs[k] - xs[k + 1]) - z).norm() <= 1e-12 * (1.0 + z.norm()));
        }
    }
}

#[test]
fn runs_reach_the_quadratic_optimum() {
    let f = Quadratic::laplacian(6);
    let xs = f.known_optimum().unwrap();
    let x0 = Vector::zeros(6);
    for precond in [Preconditioner::Identity, Preconditioner::HessianDiagonal] {
        let cfg = SolverConfig::new(Method::Pnm)
            .with_precond(precond.clone())
            .with_max_iters(200);
        let t = pnm_run(&f, &x0, &cfg).unwrap();
        assert!((t.final_x() - &xs.x).norm() < 1e-7, "{}", precond.label());
        let cfg = SolverConfig::new(Method::Anm)
            .with_precond(precond.clone())
            .with_max_iters(200);
        let t = anm_run(&f, &x0, &x0, &cfg).unwrap();
        assert!((t.final_x() - &xs.x).norm() < 1e-7, "{}", precond.label());
    }
}

#[test]
fn pnm_values_decrease_on_glm() {
    let f = glm(9, 10, 60, Link::Logistic, 0.1);
    let (l, _) = f.relative_constants().unwrap();
    let cfg = SolverConfig::new(Method::Pnm)
        .with_step_l(l)
        .with_schedule(PenaltySchedule::fixed(1.0))
        .with_max_iters(60);
    let t = pnm_run(&f, &Vector::from_element(10, 1.0), &cfg).unwrap();
    assert!(t.records.windows(2).all(|w| w[1].f <= w[0].f + 1e-14));
}
