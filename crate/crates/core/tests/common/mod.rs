#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rsel_core::{Matrix, SpdMatrix, SymmetricMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Orthogonal factor of a Gaussian matrix (modified Gram-Schmidt).
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let g = gaussian(rng, n, n);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = g.column(j);
        for q in &cols {
            let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|x| x / norm).collect());
    }
    Matrix::from_fn(n, n, |i, j| cols[j][i])
}

/// `Q·diag(λ)·Qᵀ` with log-uniform eigenvalues spanning at most `max_cond`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, max_cond: f64) -> SpdMatrix {
    let q = random_orthogonal(rng, n);
    let scale: f64 = rng.random_range(-2.0..2.0);
    let lambdas: Vec<f64> = (0..n)
        .map(|_| (scale + rng.random_range(0.0..1.0) * max_cond.ln()).exp())
        .collect();
    SpdMatrix::from_diagonal(&lambdas).unwrap().congruence(&q).unwrap()
}

/// Well-conditioned random invertible matrix `Q₁·diag(s)·Q₂` with
/// singular values in [0.3, 3].
pub fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let q1 = random_orthogonal(rng, n);
    let q2 = random_orthogonal(rng, n);
    let d = Matrix::from_diagonal(&(0..n).map(|_| rng.random_range(0.3..3.0)).collect::<Vec<_>>());
    q1.matmul(&d).matmul(&q2)
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> SymmetricMatrix {
    let g = gaussian(rng, n, n);
    SymmetricMatrix::new(g.add(&g.transpose()).scale(0.5)).unwrap()
}

/// ‖a − b‖_F / max(‖b‖_F, 1e-300).
pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm().max(1e-300)
}
