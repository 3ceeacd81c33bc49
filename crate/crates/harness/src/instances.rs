//! Seeded problem generators. All draws come from `ChaCha8Rng`, whose stream
//! is fixed across platforms and releases.

use augnewton::linalg::{Matrix, SymMatrix, Vector};
use augnewton::objective::Link;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::Dataset;

/// Seed of the bundled `data/logistic_n20_m200.csv`.
pub const BUNDLED_SEED: u64 = 20_200;
pub const BUNDLED_FEATURES: usize = 20;
pub const BUNDLED_SAMPLES: usize = 200;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        scale * rng.sample::<f64, _>(StandardNormal)
    })
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Features `N(0, 1/n)` and labels from a planted weight `w ~ N(0, I)`:
/// Bernoulli(σ(aᵀw)) mapped to ±1 for logistic, `aᵀw + 0.1ε` for squared.
pub fn synthetic_glm(features: usize, samples: usize, link: Link, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let a = gaussian_matrix(&mut r, features, samples, 1.0 / (features as f64).sqrt());
    let w = gaussian_vector(&mut r, features, 1.0);
    let mut labels = Vector::zeros(samples);
    for (j, col) in a.column_iter().enumerate() {
        let t = col.dot(&w);
        labels[j] = match link {
            Link::Logistic => {
                let p = 1.0 / (1.0 + (-t).exp());
                if r.gen::<f64>() < p {
                    1.0
                } else {
                    -1.0
                }
            }
            Link::Squared => t + 0.1 * r.sample::<f64, _>(StandardNormal),
        };
    }
    Dataset { a, labels }
}

/// The dataset shipped as `data/logistic_n20_m200.csv`.
pub fn bundled_logistic() -> Dataset {
    synthetic_glm(
        BUNDLED_FEATURES,
        BUNDLED_SAMPLES,
        Link::Logistic,
        BUNDLED_SEED,
    )
}

/// `B Bᵀ` with `B` of shape `n × rank`, entries `N(0, 1/n)`.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize, rank: usize) -> SymMatrix {
    let b = gaussian_matrix(rng, n, rank, 1.0 / (n as f64).sqrt());
    SymMatrix::symmetrized(&b * b.transpose()).expect("finite")
}

/// A positive definite metric: dense `CCᵀ/n + I/2` or diagonal with
/// entries in `[1/2, 2)`.
pub fn random_pd<R: Rng>(rng: &mut R, n: usize, dense: bool) -> SymMatrix {
    if dense {
        let c = gaussian_matrix(rng, n, n, 1.0);
        let mut m = &c * c.transpose() / n as f64;
        for i in 0..n {
            m[(i, i)] += 0.5;
        }
        SymMatrix::symmetrized(m).expect("finite")
    } else {
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        SymMatrix::from_diagonal(&d).expect("finite")
    }
}
