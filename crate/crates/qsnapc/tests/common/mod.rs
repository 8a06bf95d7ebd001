//! Shared helpers for integration tests.

use qsnapc::fockops::{ComplexMatrix, C64};

/// Dense matrix exponential by Taylor series with scaling and squaring.
/// Independent oracle for the eigendecomposition-based displacement path.
pub fn expm(m: &ComplexMatrix) -> ComplexMatrix {
    let dim = m.dim();
    let norm: f64 = (0..dim)
        .map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = norm.log2().ceil().max(0.0) as u32 + 4;
    let scale = C64::new(1.0 / 2f64.powi(s as i32), 0.0);
    let scaled = ComplexMatrix::from_fn(dim, |i, j| m.at(i, j) * scale);
    let mut term = ComplexMatrix::identity(dim);
    let mut acc = ComplexMatrix::identity(dim);
    for n in 1..30 {
        term = term.mul(&scaled);
        let inv = C64::new(1.0 / n as f64, 0.0);
        term = ComplexMatrix::from_fn(dim, |i, j| term.at(i, j) * inv);
        let sum = ComplexMatrix::from_fn(dim, |i, j| acc.at(i, j) + term.at(i, j));
        acc = sum;
    }
    for _ in 0..s {
        acc = acc.mul(&acc);
    }
    acc
}

