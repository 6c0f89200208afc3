#![allow(dead_code)]

use psgd_core::linalg::{build_projection, Matrix};
use psgd_core::simulate::dgp::standard_normal;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::{RngCore, SeedableRng};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut impl RngCore, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| standard_normal(rng)).collect();
    Matrix::from_row_major(rows, cols, data).unwrap()
}

/// `AAᵀ + εI`, well conditioned for modest `ε`.
pub fn random_spd(rng: &mut impl RngCore, p: usize, ridge: f64) -> Matrix {
    let a = gaussian_matrix(rng, p, p);
    a.matmul(&a.transpose())
        .unwrap()
        .add(&Matrix::identity(p).scale(ridge))
        .unwrap()
}

/// Projection onto the null space of a random `m × p` Gaussian `B`, together
/// with `B`.
pub fn random_projection(rng: &mut impl RngCore, p: usize, m: usize) -> (Matrix, Matrix) {
    let b = gaussian_matrix(rng, m, p);
    let proj = build_projection(&b, &vec![0.0; m]).unwrap();
    (b, proj.projection)
}

pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / a.frobenius_norm().max(b.frobenius_norm()).max(1e-300)
}

/// Kolmogorov-Smirnov statistic of `sample` against `cdf` and its asymptotic
/// p-value with Stephens' small-sample correction.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let sign = if j as u64 % 2 == 1 { 1.0 } else { -1.0 };
        p += 2.0 * sign * (-2.0 * j * j * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}
