//! Truncated-Fock-space operators and fidelities.
//!
//! Everything downstream works with dense `dim x dim` complex matrices:
//! the ladder operator, displacement and SNAP gates, the sign-flip SNAP
//! `R_pi(k)`, embedded Givens rotations, and the trace-overlap fidelity.
//! Displacements are exponentials of the truncated generator, obtained
//! through a one-time eigendecomposition of the Hermitian `i(a^dag - a)`
//! held in a [`DisplacementFrame`].

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Wrap an angle into the canonical interval `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut y = x % tau;
    if y > std::f64::consts::PI {
        y -= tau;
    } else if y <= -std::f64::consts::PI {
        y += tau;
    }
    // normalize -0.0 so serialized plans are unique
    if y == 0.0 {
        y = 0.0;
    }
    y
}

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl std::fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "ComplexMatrix(dim={})", self.dim)?;
        for i in 0..self.dim.min(8) {
            for j in 0..self.dim.min(8) {
                write!(f, " {:+.3e}{:+.3e}i", self.at(i, j).re, self.at(i, j).im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::InvalidArgument(format!(
                "matrix payload has {} entries, expected {}",
                data.len(),
                dim * dim
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [C64] {
        let d = self.dim;
        &mut self.data[i * d..(i + 1) * d]
    }

    /// Mutable views of adjacent rows `j` and `j+1`.
    pub fn rows_pair_mut(&mut self, j: usize) -> (&mut [C64], &mut [C64]) {
        let d = self.dim;
        let (a, b) = self.data.split_at_mut((j + 1) * d);
        (&mut a[j * d..], &mut b[..d])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let d = self.dim;
        let mut out = vec![ZERO; d * d];
        for i in 0..d {
            let arow = &self.data[i * d..(i + 1) * d];
            let orow = &mut out[i * d..(i + 1) * d];
            for (k, &a) in arow.iter().enumerate() {
                let brow = &rhs.data[k * d..(k + 1) * d];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        ComplexMatrix { dim: d, data: out }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> ComplexMatrix {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        out
    }

    /// Left-multiply by a diagonal matrix: row `i` scaled by `diag[i]`.
    pub fn scale_rows(&mut self, diag: &[C64]) {
        assert_eq!(diag.len(), self.dim);
        for (i, &s) in diag.iter().enumerate() {
            for v in self.row_mut(i) {
                *v *= s;
            }
        }
    }

    /// Right-multiply by a diagonal matrix: column `j` scaled by `diag[j]`.
    pub fn scale_cols(&mut self, diag: &[C64]) {
        assert_eq!(diag.len(), self.dim);
        let d = self.dim;
        for i in 0..d {
            for (v, &s) in self.data[i * d..(i + 1) * d].iter_mut().zip(diag) {
                *v *= s;
            }
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.at(i, i)).sum()
    }

    /// Max-entry norm of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &ComplexMatrix) -> f64 {
        assert_eq!(self.dim, rhs.dim);
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max-entry norm of `U^dag U - I`.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                // (U^dag U)_{ij} = sum_k conj(U_{ki}) U_{kj}
                let mut s = ZERO;
                for k in 0..d {
                    s += self.data[k * d + i].conj() * self.data[k * d + j];
                }
                if i == j {
                    s -= ONE;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    /// SHA-256 over the dimension and the raw little-endian entry bits.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for z in &self.data {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
        let digest = h.finalize();
        let mut s = String::with_capacity(64);
        for b in digest {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}

/// Ladder (annihilation) operator on the truncated Fock space:
/// `a |n> = sqrt(n) |n-1>`.
pub fn annihilation(dim: usize) -> Result<ComplexMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut m = ComplexMatrix::zeros(dim);
    for n in 1..dim {
        m.set(n - 1, n, C64::new((n as f64).sqrt(), 0.0));
    }
    Ok(m)
}

/// One-time eigendecomposition of the Hermitian `i(a^dag - a)`, reused for
/// every displacement at this dimension.
#[derive(Clone)]
pub struct DisplacementFrame {
    dim: usize,
    basis: ComplexMatrix,
    basis_dagger: ComplexMatrix,
    spectrum: Vec<f64>,
}

impl DisplacementFrame {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn basis_dagger(&self) -> &ComplexMatrix {
        &self.basis_dagger
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Diagonal of `exp(alpha (a^dag - a))` in the eigenbasis.
    pub fn exp_diag(&self, alpha: f64) -> Vec<C64> {
        self.spectrum
            .iter()
            .map(|&lam| C64::from_polar(1.0, -alpha * lam))
            .collect()
    }
}

/// Build the [`DisplacementFrame`] for `dim` Fock levels.
///
/// `i(a^dag - a)` is Hermitian tridiagonal and is unitarily equivalent to
/// the real symmetric tridiagonal matrix with zero diagonal and
/// off-diagonals `sqrt(n+1)` via the phase diagonal `diag(i^n)`, so the
/// problem reduces to a real symmetric tridiagonal eigensolve.
pub fn displacement_frame(dim: usize) -> Result<DisplacementFrame> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let diag = vec![0.0; dim];
    let off: Vec<f64> = (0..dim - 1).map(|n| ((n + 1) as f64).sqrt()).collect();
    let (mut eigvals, mut vecs) = symmetric_tridiagonal_eig(&diag, &off)?;

    // sort ascending, carrying eigenvector columns along
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigvals[a].partial_cmp(&eigvals[b]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&j| eigvals[j]).collect();
    let mut sorted_vecs = vec![0.0; dim * dim];
    for (jnew, &jold) in order.iter().enumerate() {
        for i in 0..dim {
            sorted_vecs[i * dim + jnew] = vecs[i * dim + jold];
        }
    }
    eigvals = sorted_vals;
    vecs = sorted_vecs;

    // Q = diag(i^n) V, then fix each column's phase: largest-magnitude
    // entry made real positive (ties broken by lowest row index).
    let phase_n = |n: usize| match n % 4 {
        0 => ONE,
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    };
    let mut basis = ComplexMatrix::zeros(dim);
    for j in 0..dim {
        let mut best = 0usize;
        let mut best_mag = -1.0f64;
        for i in 0..dim {
            let mag = vecs[i * dim + j].abs();
            if mag > best_mag + 1e-14 {
                best_mag = mag;
                best = i;
            }
        }
        let pivot = phase_n(best) * vecs[best * dim + j];
        if pivot.norm() == 0.0 {
            return Err(Error::NumericalFailure(
                "zero eigenvector column from tridiagonal solver".into(),
            ));
        }
        let fix = pivot.conj() / pivot.norm();
        for i in 0..dim {
            basis.set(i, j, phase_n(i) * vecs[i * dim + j] * fix);
        }
    }
    let basis_dagger = basis.dagger();

    let frame = DisplacementFrame { dim, basis, basis_dagger, spectrum: eigvals };
    // refuse to hand out a frame the eigensolver got wrong
    let dev = frame.basis.unitarity_deviation();
    if !dev.is_finite() || dev > 1e-11 {
        return Err(Error::NumericalFailure(format!(
            "eigenbasis not unitary (deviation {dev:.3e})"
        )));
    }
    Ok(frame)
}

/// Displacement gate `D(alpha) = exp(alpha (a^dag - a))` for real alpha,
/// as the exponential of the truncated generator.
pub fn displacement(frame: &DisplacementFrame, alpha: f64) -> ComplexMatrix {
    let mut m = frame.basis.clone();
    m.scale_cols(&frame.exp_diag(alpha));
    m.mul(&frame.basis_dagger)
}

/// SNAP gate: diagonal `exp(i theta_n)` per Fock level.
pub fn snap(phases: &[f64]) -> ComplexMatrix {
    let dim = phases.len();
    let mut m = ComplexMatrix::zeros(dim);
    for (n, &p) in phases.iter().enumerate() {
        m.set(n, n, C64::from_polar(1.0, p));
    }
    m
}

/// Phase vector for `R_pi(k)`: pi on levels `0..=k`, zero above.
pub fn r_pi_phases(dim: usize, k: usize) -> Result<Vec<f64>> {
    if k >= dim {
        return Err(Error::InvalidArgument(format!(
            "r_pi level index {k} out of range for dim {dim}"
        )));
    }
    let mut phases = vec![0.0; dim];
    for p in phases.iter_mut().take(k + 1) {
        *p = std::f64::consts::PI;
    }
    Ok(phases)
}

/// `R_pi(k)` as a matrix: `diag(-1,..,-1, 1,..,1)` with `k+1` leading `-1`s.
/// Built with exact integer signs so `R^2 = I` holds exactly.
pub fn r_pi(dim: usize, k: usize) -> Result<ComplexMatrix> {
    if k >= dim {
        return Err(Error::InvalidArgument(format!(
            "r_pi level index {k} out of range for dim {dim}"
        )));
    }
    let mut m = ComplexMatrix::identity(dim);
    for j in 0..=k {
        m.set(j, j, C64::new(-1.0, 0.0));
    }
    Ok(m)
}

/// Givens rotation on levels `|k>, |k+1>` embedded in an identity.
pub fn givens_embed(dim: usize, k: usize, theta: f64) -> Result<ComplexMatrix> {
    if k + 1 >= dim {
        return Err(Error::InvalidArgument(format!(
            "givens level index {k} out of range for dim {dim}"
        )));
    }
    let (s, c) = theta.sin_cos();
    let mut m = ComplexMatrix::identity(dim);
    m.set(k, k, C64::new(c, 0.0));
    m.set(k, k + 1, C64::new(-s, 0.0));
    m.set(k + 1, k, C64::new(s, 0.0));
    m.set(k + 1, k + 1, C64::new(c, 0.0));
    Ok(m)
}

/// Trace-overlap fidelity `|Tr(U^dag V)|^2 / dim^2`, in `[0, 1]` for
/// unitary arguments and invariant under a global phase on either side.
pub fn fidelity(u: &ComplexMatrix, v: &ComplexMatrix) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch(u.dim(), v.dim()));
    }
    // Tr(U^dag V) is the elementwise inner product <U, V>
    let mut tr = ZERO;
    for (a, b) in u.entries().iter().zip(v.entries()) {
        tr += a.conj() * b;
    }
    let d = u.dim() as f64;
    Ok(tr.norm_sqr() / (d * d))
}

/// Eigendecomposition of a real symmetric tridiagonal matrix by the
/// implicit QL algorithm with Wilkinson shifts (tql2). Returns the
/// eigenvalues and the eigenvector matrix with eigenvectors as columns.
fn symmetric_tridiagonal_eig(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    assert_eq!(off.len(), n - 1);
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = vec![0.0f64; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }

    for l in 0..n {
        let mut iter = 0;
        loop {
            // find a small subdiagonal element
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::NumericalFailure(
                    "tridiagonal QL iteration failed to converge".into(),
                ));
            }
            // Wilkinson shift
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let sign_r = if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = 1.0f64;
            let mut c = 1.0f64;
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // accumulate the rotation into the eigenvector columns
                for row in 0..n {
                    f = z[row * n + i + 1];
                    z[row * n + i + 1] = s * z[row * n + i] + c * f;
                    z[row * n + i] = c * z[row * n + i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((d, z))
}
