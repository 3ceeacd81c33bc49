//! Dense symmetric linear algebra used by the solvers and the diagnostics.
//!
//! Storage and the low-level factorizations come from `nalgebra`. This module
//! adds the pieces the methods depend on: a validated symmetric matrix type,
//! Cholesky solves with a bounded jitter policy for marginally definite shifted
//! systems, sorted eigendecompositions, and the pseudo-inverse, square-root and
//! weighted-norm helpers built on them.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use thiserror::Error;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative threshold below which eigenvalues are treated as numerically zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;
const JITTER_RETRIES: usize = 3;
const PSD_NEG_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite (Cholesky failed after {retries} jitter retries)")]
    NotPositiveDefinite { retries: usize },
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },
    #[error("symmetric eigensolver did not converge")]
    ConvergenceFailure,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// A square matrix known to be symmetric with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Validates symmetry to `1e-12 * max|M|` and stores the exactly
    /// symmetrized matrix.
    pub fn new(m: Matrix) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let scale = m.amax();
        let asymmetry = max_asymmetry(&m);
        if asymmetry > SYMMETRY_TOL * scale {
            return Err(LinalgError::NotSymmetric { asymmetry });
        }
        Ok(Self::symmetrize(m))
    }

    /// Builds `(M + Mᵀ) / 2` without a tolerance check. Intended for products
    /// that are symmetric in exact arithmetic but carry rounding asymmetry.
    pub fn symmetrized(m: Matrix) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self::symmetrize(m))
    }

    fn symmetrize(m: Matrix) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(Matrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        if d.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(SymMatrix(Matrix::from_diagonal(
            &Vector::from_column_slice(d),
        )))
    }

    /// Row-major constructor, convenient in tests.
    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(LinalgError::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        Self::new(Matrix::from_row_slice(n, n, data))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn diagonal(&self) -> Vector {
        self.0.diagonal()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn mul_vec(&self, x: &Vector) -> Vector {
        &self.0 * x
    }

    /// `(1/rho) * G + H`, the shifted matrix of every penalty step.
    pub fn shifted(h: &SymMatrix, g: &SymMatrix, rho: f64) -> SymMatrix {
        SymMatrix(&h.0 + &g.0 / rho)
    }
}

fn max_asymmetry(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vector,
    /// Orthogonal matrix whose columns are the eigenvectors.
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `V f(Λ) Vᵀ` for a scalar map applied to each eigenvalue.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let d = self.eigenvalues.map(f);
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= d[j];
        }
        scaled * v.transpose()
    }

    /// Eigenvalues strictly above `rank_tol * lambda_max`, ascending.
    pub fn nonzero_eigenvalues(&self, rank_tol: f64) -> Vec<f64> {
        let cut = rank_cutoff(self.lambda_max(), rank_tol);
        self.eigenvalues
            .iter()
            .copied()
            .filter(|&l| l > cut)
            .collect()
    }
}

fn rank_cutoff(lambda_max: f64, rank_tol: f64) -> f64 {
    rank_tol * lambda_max.max(0.0)
}

/// Solves `M x = b` for symmetric positive definite `M` by Cholesky.
///
/// If the plain factorization fails, the diagonal is shifted by
/// `1e-12 * trace(M) / n`, escalated tenfold on each of at most three retries.
pub fn spd_solve(m: &SymMatrix, b: &Vector) -> Result<Vector> {
    check_len(m, b)?;
    Ok(cholesky_with_jitter(m)?.solve(b))
}

/// Inverse of an SPD matrix via its Cholesky factor, using the same jitter
/// policy as [`spd_solve`].
pub fn spd_inverse(m: &SymMatrix) -> Result<SymMatrix> {
    SymMatrix::symmetrized(cholesky_with_jitter(m)?.inverse())
}

/// Cholesky factor with the bounded jitter retry policy.
pub fn cholesky_with_jitter(m: &SymMatrix) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.0.clone()) {
        return Ok(c);
    }
    let n = m.order().max(1) as f64;
    let base = {
        let t = m.trace() / n;
        if t > 0.0 {
            t
        } else {
            m.0.amax().max(1.0)
        }
    };
    let mut jitter = 1e-12 * base;
    for _ in 0..JITTER_RETRIES {
        let mut shifted = m.0.clone();
        for i in 0..m.order() {
            shifted[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(shifted) {
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(LinalgError::NotPositiveDefinite {
        retries: JITTER_RETRIES,
    })
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eig(m: &SymMatrix) -> Result<EigenDecomposition> {
    let n = m.order();
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: Vector::zeros(0),
            eigenvectors: Matrix::zeros(0, 0),
        });
    }
    let budget = 1000 * n.max(10);
    let eig = SymmetricEigen::try_new(m.0.clone(), f64::EPSILON, budget)
        .ok_or(LinalgError::ConvergenceFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Applies the Moore-Penrose pseudo-inverse of a symmetric PSD matrix to `b`.
/// Eigenvalues at or below `rank_tol * lambda_max` are treated as zero.
pub fn pinv_apply(m: &SymMatrix, b: &Vector, rank_tol: f64) -> Result<Vector> {
    check_len(m, b)?;
    let eig = sym_eig(m)?;
    Ok(pinv_apply_eig(&eig, b, rank_tol))
}

pub(crate) fn pinv_apply_eig(eig: &EigenDecomposition, b: &Vector, rank_tol: f64) -> Vector {
    let cut = rank_cutoff(eig.lambda_max(), rank_tol);
    let v = &eig.eigenvectors;
    let mut out = Vector::zeros(b.len());
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cut && lambda > 0.0 {
            let col = v.column(j);
            let coef = col.dot(b) / lambda;
            out.axpy(coef, &col, 1.0);
        }
    }
    out
}

/// Pseudo-inverse of a symmetric PSD matrix as an explicit matrix.
pub fn pinv(m: &SymMatrix, rank_tol: f64) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    let cut = rank_cutoff(eig.lambda_max(), rank_tol);
    SymMatrix::symmetrized(eig.map_spectrum(|l| if l > cut && l > 0.0 { 1.0 / l } else { 0.0 }))
}

/// Principal square root of a PSD matrix. Eigenvalues down to
/// `-1e-10 * max|λ|` are clamped to zero; anything more negative is an error.
pub fn psd_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    let scale = eig.eigenvalues.amax();
    let lo = eig.lambda_min();
    if lo < -PSD_NEG_TOL * scale {
        return Err(LinalgError::NotPsd { eigenvalue: lo });
    }
    SymMatrix::symmetrized(eig.map_spectrum(|l| l.max(0.0).sqrt()))
}

/// `G^{-1/2}` for a positive definite `G`.
pub fn pd_inv_sqrt(g: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(g)?;
    let lo = eig.lambda_min();
    if lo <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite { retries: 0 });
    }
    SymMatrix::symmetrized(eig.map_spectrum(|l| 1.0 / l.sqrt()))
}

/// `xᵀ M x`. Rounding negatives down to `-1e-12 * ‖M‖_F * ‖x‖²` are
/// clamped to zero.
pub fn weighted_norm_sq(x: &Vector, m: &SymMatrix) -> f64 {
    let v = x.dot(&m.mul_vec(x));
    if v < 0.0 && v >= -1e-12 * m.frobenius_norm() * x.norm_squared() {
        0.0
    } else {
        v
    }
}

/// Smallest eigenvalue above `rank_tol * lambda_max`; zero for a
/// (numerically) zero matrix.
pub fn lambda_min_pos(m: &SymMatrix, rank_tol: f64) -> Result<f64> {
    let eig = sym_eig(m)?;
    Ok(eig
        .nonzero_eigenvalues(rank_tol)
        .first()
        .copied()
        .unwrap_or(0.0))
}

fn check_len(m: &SymMatrix, b: &Vector) -> Result<()> {
    if m.order() != b.len() {
        return Err(LinalgError::DimensionMismatch {
            expected: m.order(),
            got: b.len(),
        });
    }
    Ok(())
}
