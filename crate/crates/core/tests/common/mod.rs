//! Dense reference operators built without the crate's FFT code.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;

/// Dense `-d²/dx²` on a periodic grid of `n` points over a box of length
/// `len`, summed mode by mode over `k ∈ {-n/2, …, n/2-1}`.
pub fn dense_neg_laplacian_1d(n: usize, len: f64) -> DMatrix<f64> {
    let half = (n / 2) as i64;
    DMatrix::from_fn(n, n, |j, k| {
        let diff = j as f64 - k as f64;
        (-half..half)
            .map(|kk| {
                let w = 2.0 * PI * kk as f64 / len;
                w * w * (2.0 * PI * kk as f64 * diff / n as f64).cos()
            })
            .sum::<f64>()
            / n as f64
    })
}

/// Dense `-Δ` in two dimensions (row-major flattening) via a Kronecker sum.
pub fn dense_neg_laplacian_2d(n: usize, len: f64) -> DMatrix<f64> {
    let d1 = dense_neg_laplacian_1d(n, len);
    let eye = DMatrix::<f64>::identity(n, n);
    d1.kronecker(&eye) + eye.kronecker(&d1)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
