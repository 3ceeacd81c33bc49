//! Scalar root finding with the penalty and augmented updates.
//!
//! With `f` playing the gradient and `f'` the Hessian, the penalty step is
//! `x − ρf(x)/(1 + ρf'(x))` and the augmented step adds the momentum term
//! `(x_k − x_{k−1})/(1 + ρf'(x_k))`.

use thiserror::Error;

const DENOMINATOR_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("1 + rho f'(x) vanished at iteration {iteration} (x = {x})")]
    DenominatorVanished { iteration: usize, x: f64 },
    #[error("no root within {iterations} iterations (last x = {last}, |f| = {residual:e})")]
    MaxIters {
        iterations: usize,
        last: f64,
        residual: f64,
    },
    #[error("iterate became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootResult {
    pub root: f64,
    pub iterations: usize,
    /// Every iterate, seeds included.
    pub trace: Vec<f64>,
}

pub fn root_penalty_newton(
    f: impl Fn(f64) -> f64,
    fprime: impl Fn(f64) -> f64,
    x0: f64,
    rho: f64,
    tol: f64,
    max_iters: usize,
) -> Result<RootResult, RootError> {
    iterate(&f, &fprime, x0, x0, rho, tol, max_iters, false)
}

pub fn root_augmented_newton(
    f: impl Fn(f64) -> f64,
    fprime: impl Fn(f64) -> f64,
    x0: f64,
    x1: f64,
    rho: f64,
    tol: f64,
    max_iters: usize,
) -> Result<RootResult, RootError> {
    iterate(&f, &fprime, x0, x1, rho, tol, max_iters, true)
}

#[allow(clippy::too_many_arguments)]
fn iterate(
    f: &dyn Fn(f64) -> f64,
    fprime: &dyn Fn(f64) -> f64,
    x0: f64,
    x1: f64,
    rho: f64,
    tol: f64,
    max_iters: usize,
    momentum: bool,
) -> Result<RootResult, RootError> {
    let mut trace = vec![x0];
    if momentum {
        trace.push(x1);
    }
    let (mut prev, mut x) = if momentum { (x0, x1) } else { (x0, x0) };
    for iteration in 0..=max_iters {
        let fx = f(x);
        if !fx.is_finite() || !x.is_finite() {
            return Err(RootError::NonFinite { iteration });
        }
        if fx.abs() <= tol {
            return Ok(RootResult {
                root: x,
                iterations: iteration,
                trace,
            });
        }
        if iteration == max_iters {
            return Err(RootError::MaxIters {
                iterations: max_iters,
                last: x,
                residual: fx.abs(),
            });
        }
        let denom = 1.0 + rho * fprime(x);
        if denom.abs() <= DENOMINATOR_FLOOR {
            return Err(RootError::DenominatorVanished { iteration, x });
        }
        let mut next = x - rho * fx / denom;
        if momentum {
            next += (x - prev) / denom;
        }
        prev = x;
        x = next;
        trace.push(x);
    }
    unreachable!("loop returns on its last iteration")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(x: f64) -> f64 {
        x * x - 2.0
    }

    fn fp(x: f64) -> f64 {
        2.0 * x
    }

    #[test]
    fn first_penalty_step_from_two() {
        let r = root_penalty_newton(f, fp, 2.0, 1.0, 1e-10, 100).unwrap();
        assert_eq!(r.trace[1], 1.6);
    }

    #[test]
    fn both_variants_reach_sqrt_two() {
        let p = root_penalty_newton(f, fp, 2.0, 10.0, 1e-10, 100).unwrap();
        assert!(f(p.root).abs() <= 1e-10);
        assert!((p.root - std::f64::consts::SQRT_2).abs() < 1e-10);
        let a = root_augmented_newton(f, fp, 2.0, 2.0, 10.0, 1e-10, 100).unwrap();
        assert!(f(a.root).abs() <= 1e-10);
    }

    #[test]
    fn augmented_with_equal_seeds_starts_like_penalty() {
        let a = root_augmented_newton(f, fp, 2.0, 2.0, 1.0, 1e-10, 100).unwrap();
        assert_eq!(a.trace[2], 1.6);
    }

    #[test]
    fn linear_with_large_penalty_lands_in_one_step() {
        let r = root_penalty_newton(|x| x, |_| 1.0, 5.0, 1e12, 1e-10, 10).unwrap();
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn vanishing_denominator() {
        // 1 + ρ f'(x) = 1 − 1 = 0
        let e = root_penalty_newton(|x| x + 1.0, |_| -1.0, 0.0, 1.0, 1e-10, 10).unwrap_err();
        assert_eq!(
            e,
            RootError::DenominatorVanished {
                iteration: 0,
                x: 0.0
            }
        );
    }

    #[test]
    fn iteration_budget() {
        let e = root_penalty_newton(f, fp, 2.0, 1e-3, 1e-12, 3).unwrap_err();
        assert!(matches!(e, RootError::MaxIters { iterations: 3, .. }));
    }
}
