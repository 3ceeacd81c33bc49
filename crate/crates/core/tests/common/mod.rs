#![allow(dead_code)]

use augnewton::linalg::{Matrix, SymMatrix, Vector};
use augnewton::objective::{GlmProblem, Link};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// `B Bᵀ` with `B` of shape `n × rank`.
pub fn psd_of_rank(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> SymMatrix {
    let b = gaussian(rng, n, rank);
    SymMatrix::symmetrized(&b * b.transpose()).unwrap()
}

/// Dense PD matrix `C Cᵀ/n + I/2`.
pub fn dense_pd(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let c = gaussian(rng, n, n);
    let mut m = &c * c.transpose() / n as f64;
    for i in 0..n {
        m[(i, i)] += 0.5;
    }
    SymMatrix::symmetrized(m).unwrap()
}

pub fn diagonal_pd(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    SymMatrix::from_diagonal(&d).unwrap()
}

/// Logistic or least-squares GLM with features `N(0, 1/n)`; logistic labels
/// are drawn from a planted model.
pub fn glm(seed: u64, n: usize, m: usize, link: Link, alpha: f64) -> GlmProblem {
    let mut r = rng(seed);
    let a = gaussian(&mut r, n, m) / (n as f64).sqrt();
    let w = gaussian_vec(&mut r, n, 1.0);
    let labels = Vector::from_fn(m, |i, _| {
        let t = a.column(i).dot(&w);
        match link {
            Link::Logistic => {
                let p = 1.0 / (1.0 + (-t).exp());
                if r.gen::<f64>() < p {
                    1.0
                } else {
                    -1.0
                }
            }
            Link::Squared => t + 0.1 * r.sample::<f64, _>(StandardNormal),
        }
    });
    GlmProblem::new(a, link, alpha, Some(labels)).unwrap()
}

/// Dense inverse by LU, independent of the Cholesky path used by the crate.
pub fn lu_inverse(m: &Matrix) -> Matrix {
    m.clone().lu().try_inverse().expect("invertible")
}
