//! Benchmark target unitaries: the centered QFT embedded in a larger
//! qudit space and seeded Haar-random unitaries.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::fockops::{ComplexMatrix, C64};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Qft,
    Haar,
    /// Matrix read from a file; constructed by the CLI, not here.
    File,
}

#[derive(Debug, Clone, Copy)]
pub struct TargetSpec {
    pub kind: TargetKind,
    /// Active dimension (levels the gate acts on non-trivially).
    pub n: usize,
    /// Full qudit dimension.
    pub dim: usize,
    pub seed: Option<u64>,
}

impl TargetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n > self.dim {
            return Err(Error::InvalidArgument(format!(
                "active dimension N={} must satisfy 2 <= N <= dim={}",
                self.n, self.dim
            )));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<ComplexMatrix> {
        self.validate()?;
        match self.kind {
            TargetKind::Qft => qft(self.n, self.dim),
            TargetKind::Haar => haar_random(self.dim, self.seed.unwrap_or(0)),
            TargetKind::File => Err(Error::InvalidArgument(
                "file targets are read from disk, not generated".into(),
            )),
        }
    }
}

/// Centered QFT on the first `n` levels, identity on the rest:
/// `F[l][m] = exp(i (l - n/2)(m - n/2) 2 pi / n) / sqrt(n)` with
/// zero-based `l, m`.
pub fn qft(n: usize, dim: usize) -> Result<ComplexMatrix> {
    if n < 2 || n > dim {
        return Err(Error::InvalidArgument(format!(
            "QFT size N={n} must satisfy 2 <= N <= dim={dim}"
        )));
    }
    let nf = n as f64;
    let scale = 1.0 / nf.sqrt();
    let mut m = ComplexMatrix::identity(dim);
    for l in 0..n {
        for c in 0..n {
            let phase = (l as f64 - nf / 2.0) * (c as f64 - nf / 2.0) * std::f64::consts::TAU / nf;
            m.set(l, c, Complex64::from_polar(scale, phase));
        }
    }
    Ok(m)
}

/// Haar-random unitary: QR (modified Gram-Schmidt with one
/// reorthogonalization pass) of a seeded complex-Gaussian matrix. MGS
/// yields positive real diagonal R, which is the unique-factor convention
/// that makes Q Haar-distributed. Deterministic per seed.
pub fn haar_random(dim: usize, seed: u64) -> Result<ComplexMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut cols: Vec<Vec<C64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let re: f64 = normal.sample(&mut rng);
                    let im: f64 = normal.sample(&mut rng);
                    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                })
                .collect()
        })
        .collect();

    for j in 0..dim {
        // two orthogonalization passes against the finished columns
        for _ in 0..2 {
            for i in 0..j {
                let proj: C64 = cols[i]
                    .iter()
                    .zip(&cols[j])
                    .map(|(q, v)| q.conj() * v)
                    .sum();
                for t in 0..dim {
                    let qv = cols[i][t];
                    cols[j][t] -= proj * qv;
                }
            }
        }
        let norm: f64 = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= 1e-14 {
            return Err(Error::NumericalFailure(
                "rank-deficient Gaussian sample in Haar generation".into(),
            ));
        }
        for v in cols[j].iter_mut() {
            *v /= norm;
        }
    }

    Ok(ComplexMatrix::from_fn(dim, |i, j| cols[j][i]))
}
