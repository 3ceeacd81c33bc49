use super::{Preconditioner, Result, SolverError};
use crate::linalg::{pinv_apply_eig, spd_solve, sym_eig, SymMatrix, Vector, DEFAULT_RANK_TOL};
use crate::objective::Objective;

const RANGE_TOL: f64 = 1e-8;

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(SolverError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `H†g`, after checking that `g` lies in `Range(H)`.
pub(crate) fn newton_direction(g: &Vector, h: &SymMatrix) -> Result<Vector> {
    let eig = sym_eig(h)?;
    let d = pinv_apply_eig(&eig, g, DEFAULT_RANK_TOL);
    let residual = (h.mul_vec(&d) - g).norm();
    if residual > RANGE_TOL * g.norm() {
        return Err(SolverError::RangeViolation { residual });
    }
    Ok(d)
}

/// `x − (1/L) H†(x) ∇f(x)`.
pub fn newton_step<M: Objective + ?Sized>(model: &M, x: &Vector, step_l: f64) -> Result<Vector> {
    check_dim(model.dim(), x.len())?;
    let d = newton_direction(&model.gradient(x), &model.hessian(x))?;
    Ok(x - d / step_l)
}

pub(crate) fn pnm_update(
    x: &Vector,
    g: &Vector,
    h: &SymMatrix,
    precond: &SymMatrix,
    rho: f64,
    step_l: f64,
) -> Result<Vector> {
    let shifted = SymMatrix::shifted(h, precond, rho);
    Ok(x - spd_solve(&shifted, g)? / step_l)
}

/// Penalty Newton step `x − (1/L)((1/ρ)G + H(x))⁻¹∇f(x)`.
pub fn pnm_step<M: Objective + ?Sized>(
    model: &M,
    x: &Vector,
    rho: f64,
    g: &SymMatrix,
    step_l: f64,
) -> Result<Vector> {
    check_dim(model.dim(), x.len())?;
    check_dim(model.dim(), g.order())?;
    pnm_update(x, &model.gradient(x), &model.hessian(x), g, rho, step_l)
}

/// Multiplier estimate `z` of the augmented Lagrangian and the scratch
/// vector `u = (ρ/L)∇f(x) + Gz` from the last update.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub z: Vector,
    pub u: Vector,
}

impl DualState {
    pub fn new(z: Vector) -> Self {
        let u = Vector::zeros(z.len());
        Self { z, u }
    }

    /// Multiplier matching the momentum form started from `(x0, x1)`.
    pub fn from_points(x0: &Vector, x1: &Vector) -> Self {
        Self::new(x0 - x1)
    }
}

pub(crate) fn anm_dual_update(
    x: &Vector,
    dual: &DualState,
    grad: &Vector,
    h: &SymMatrix,
    precond: &SymMatrix,
    rho: f64,
    step_l: f64,
) -> Result<(Vector, DualState)> {
    let u = grad * (rho / step_l) + precond.mul_vec(&dual.z);
    let shifted = SymMatrix::shifted(h, precond, rho);
    let z = spd_solve(&shifted, &u)? / rho;
    Ok((x - &z, DualState { z, u }))
}

/// Augmented Newton step in multiplier form:
/// `z⁺ = (1/ρ) K(x) u`, `x⁺ = x − z⁺`.
pub fn anm_step_dual<M: Objective + ?Sized>(
    model: &M,
    x: &Vector,
    dual: &DualState,
    rho: f64,
    g: &SymMatrix,
    step_l: f64,
) -> Result<(Vector, DualState)> {
    check_dim(model.dim(), x.len())?;
    check_dim(model.dim(), dual.z.len())?;
    check_dim(model.dim(), g.order())?;
    anm_dual_update(
        x,
        dual,
        &model.gradient(x),
        &model.hessian(x),
        g,
        rho,
        step_l,
    )
}

pub(crate) fn anm_momentum_update(
    x: &Vector,
    x_prev: &Vector,
    grad: &Vector,
    h: &SymMatrix,
    precond: &SymMatrix,
    rho: f64,
    step_l: f64,
) -> Result<Vector> {
    let rhs = grad / step_l - precond.mul_vec(&(x - x_prev)) / rho;
    let shifted = SymMatrix::shifted(h, precond, rho);
    Ok(x - spd_solve(&shifted, &rhs)?)
}

/// Augmented Newton step in momentum form:
/// `x − ((1/ρ)G + H)⁻¹[(1/L)∇f(x) − (1/ρ)G(x − x_prev)]`.
pub fn anm_step_momentum<M: Objective + ?Sized>(
    model: &M,
    x: &Vector,
    x_prev: &Vector,
    rho: f64,
    g: &SymMatrix,
    step_l: f64,
) -> Result<Vector> {
    check_dim(model.dim(), x.len())?;
    check_dim(model.dim(), x_prev.len())?;
    check_dim(model.dim(), g.order())?;
    anm_momentum_update(
        x,
        x_prev,
        &model.gradient(x),
        &model.hessian(x),
        g,
        rho,
        step_l,
    )
}

/// Levenberg: the penalty step with `G = I`.
pub fn levenberg_step<M: Objective + ?Sized>(
    model: &M,
    x: &Vector,
    rho: f64,
    step_l: f64,
) -> Result<Vector> {
    pnm_step(model, x, rho, &SymMatrix::identity(model.dim()), step_l)
}

/// Levenberg-Marquardt: the penalty step with `G = diag(H(x))`.
pub fn levenberg_marquardt_step<M: Objective + ?Sized>(
    model: &M,
    x: &Vector,
    rho: f64,
    step_l: f64,
) -> Result<Vector> {
    let h = model.hessian(x);
    let d = Preconditioner::HessianDiagonal.realize(&h)?;
    pnm_update(x, &model.gradient(x), &h, &d, rho, step_l)
}

/// Augmented Levenberg: the momentum step with `G = I`.
pub fn augmented_levenberg_step<M: Objective + ?Sized>(
    model: &M,
    x: &Vector,
    x_prev: &Vector,
    rho: f64,
    step_l: f64,
) -> Result<Vector> {
    anm_step_momentum(
        model,
        x,
        x_prev,
        rho,
        &SymMatrix::identity(model.dim()),
        step_l,
    )
}

/// Augmented Levenberg-Marquardt: the momentum step with `G = diag(H(x))`.
pub fn augmented_levenberg_marquardt_step<M: Objective + ?Sized>(
    model: &M,
    x: &Vector,
    x_prev: &Vector,
    rho: f64,
    step_l: f64,
) -> Result<Vector> {
    let h = model.hessian(x);
    let d = Preconditioner::HessianDiagonal.realize(&h)?;
    anm_momentum_update(x, x_prev, &model.gradient(x), &h, &d, rho, step_l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Quadratic;
    use approx::assert_relative_eq;

    fn v(d: &[f64]) -> Vector {
        Vector::from_column_slice(d)
    }

    fn one() -> SymMatrix {
        SymMatrix::identity(1)
    }

    #[test]
    fn newton_is_exact_on_half_norm() {
        let f = Quadratic::isotropic(2);
        assert_relative_eq!(
            newton_step(&f, &v(&[2.0, 2.0]), 1.0).unwrap(),
            v(&[0.0, 0.0])
        );
        assert_relative_eq!(
            newton_step(&f, &v(&[2.0, 2.0]), 2.0).unwrap(),
            v(&[1.0, 1.0])
        );
    }

    #[test]
    fn newton_flags_gradient_outside_range() {
        // f = ½x₁² + x₂ has singular Hessian and gradient component along e₂.
        let q = SymMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let f = Quadratic::new(q, v(&[0.0, -1.0])).unwrap();
        assert!(matches!(
            newton_step(&f, &v(&[1.0, 1.0]), 1.0),
            Err(SolverError::RangeViolation { .. })
        ));
    }

    #[test]
    fn pnm_scalar_examples() {
        let f = Quadratic::isotropic(1);
        assert_eq!(
            pnm_step(&f, &v(&[2.0]), 1.0, &one(), 1.0).unwrap(),
            v(&[1.0])
        );
        let near = pnm_step(&f, &v(&[2.0]), 1e12, &one(), 1.0).unwrap();
        assert!(near[0].abs() < 1e-11);
        assert_eq!(
            pnm_step(&f, &v(&[0.0]), 1.0, &one(), 1.0).unwrap(),
            v(&[0.0])
        );
    }

    #[test]
    fn anm_dual_scalar_examples() {
        let f = Quadratic::isotropic(1);
        let (x, dual) =
            anm_step_dual(&f, &v(&[2.0]), &DualState::new(v(&[0.0])), 1.0, &one(), 1.0).unwrap();
        assert_eq!(dual.u, v(&[2.0]));
        assert_relative_eq!(dual.z, v(&[1.0]), epsilon = 1e-15);
        assert_relative_eq!(x, v(&[1.0]), epsilon = 1e-15);
        let (x, dual) =
            anm_step_dual(&f, &v(&[0.0]), &DualState::new(v(&[0.0])), 1.0, &one(), 1.0).unwrap();
        assert_eq!(x, v(&[0.0]));
        assert_eq!(dual.z, v(&[0.0]));
    }

    #[test]
    fn anm_momentum_scalar_examples() {
        let f = Quadratic::isotropic(1);
        let step = |x: f64, prev: f64| {
            anm_step_momentum(&f, &v(&[x]), &v(&[prev]), 1.0, &one(), 1.0).unwrap()
        };
        assert_relative_eq!(step(2.0, 2.0), v(&[1.0]), epsilon = 1e-15);
        assert_relative_eq!(step(1.0, 2.0), v(&[0.0]), epsilon = 1e-15);
    }

    #[test]
    fn momentum_vanishes_in_newton_limit() {
        let q = SymMatrix::from_row_slice(2, &[3.0, 1.0, 1.0, 2.0]).unwrap();
        let f = Quadratic::new(q, v(&[1.0, -1.0])).unwrap();
        let x = v(&[0.7, -2.0]);
        let x_prev = v(&[5.0, 3.0]);
        let newton = newton_step(&f, &x, 1.3).unwrap();
        let anm = anm_step_momentum(&f, &x, &x_prev, 1e12, &SymMatrix::identity(2), 1.3).unwrap();
        assert!((anm - &newton).norm() <= 1e-8 * (1.0 + newton.norm()));
    }

    #[test]
    fn fixed_points() {
        let q = SymMatrix::from_row_slice(2, &[3.0, 1.0, 1.0, 2.0]).unwrap();
        let f = Quadratic::new(q, v(&[1.0, -1.0])).unwrap();
        let xs = f.known_optimum().unwrap().x;
        let g = SymMatrix::from_diagonal(&[2.0, 0.5]).unwrap();
        let p = pnm_step(&f, &xs, 3.0, &g, 1.0).unwrap();
        assert!((p - &xs).norm() < 1e-14);
        let a = anm_step_momentum(&f, &xs, &xs, 3.0, &g, 1.0).unwrap();
        assert!((a - &xs).norm() < 1e-14);
        // with momentum the optimum is not fixed
        let a = anm_step_momentum(&f, &xs, &(&xs + v(&[1.0, 0.0])), 3.0, &g, 1.0).unwrap();
        assert!((a - &xs).norm() > 1e-3);
    }

    #[test]
    fn dimension_checks() {
        let f = Quadratic::isotropic(2);
        assert!(matches!(
            pnm_step(&f, &v(&[1.0]), 1.0, &SymMatrix::identity(2), 1.0),
            Err(SolverError::DimensionMismatch { .. })
        ));
    }
}
