//! Dense complex Hermitian linear algebra.
//!
//! Everything here works on small dense matrices (`N <= 32` for configurations,
//! `N^2 <= 1024` for superoperators). Eigendecompositions are backed by
//! nalgebra's Hermitian tridiagonal QR solver and post-processed into a
//! deterministic form: ascending eigenvalues and a fixed per-column phase.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Absolute per-entry tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// An `N x N` complex matrix equal to its conjugate transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Validates Hermiticity (absolute tolerance [`HERMITIAN_TOL`] per entry) and
    /// stores the exact Hermitian part.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Validation(format!(
                "matrix is not square: {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::Validation("matrix dimension must be >= 1".into()));
        }
        let dev = hermiticity_defect(&m);
        if !(dev <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::from_hermitian_part(&m))
    }

    /// `(m + m^dagger) / 2`, no validation. `m` must be square.
    pub fn from_hermitian_part(m: &CMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "square matrix required");
        Self((m + m.adjoint()).scale(0.5))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(diag[i], 0.0)
            } else {
                C64::default()
            }
        }))
    }

    /// Builds `m` from its upper triangle given by `f(i, j)` for `i <= j`;
    /// diagonal imaginary parts are dropped.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let z = f(i, j);
                if i == j {
                    m[(i, i)] = c(z.re, 0.0);
                } else {
                    m[(i, j)] = z;
                    m[(j, i)] = z.conj();
                }
            }
        }
        Self(m)
    }

    /// Projector `|v><v|` onto a (not necessarily normalized) vector.
    pub fn outer(v: &CVector) -> Self {
        Self::from_hermitian_part(&(v * v.adjoint()))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Hilbert-Schmidt norm `sqrt(Tr(A^dagger A))`.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    /// `A + shift * I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..self.dim() {
            m[(i, i)].re += shift;
        }
        Self(m)
    }

    /// `<v|A|v>`, real for Hermitian `A`.
    pub fn expectation(&self, v: &CVector) -> f64 {
        v.dotc(&(&self.0 * v)).re
    }

    pub fn eig(&self) -> EigenDecomposition {
        hermitian_eig(self)
    }

    /// Squared Hermitian matrix (again Hermitian).
    pub fn square(&self) -> Self {
        Self::from_hermitian_part(&(&self.0 * &self.0))
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: Self) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: Self) -> HermitianMatrix {
        HermitianMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, rhs: f64) -> HermitianMatrix {
        self.scale(rhs)
    }
}

/// Largest `|m_ij - conj(m_ji)|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d.is_nan() {
                return f64::NAN;
            }
            worst = worst.max(d);
        }
    }
    worst
}

/// Spectral decomposition `H = V diag(eigenvalues) V^dagger`.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.eigenvectors.column(k).into_owned()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(l);
        }
        scaled * v.adjoint()
    }
}

/// Full eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are sorted ascending. Each eigenvector is rotated so that its
/// largest-magnitude component (first one on ties) is real and positive, which
/// makes the output a deterministic function of the input.
pub fn hermitian_eig(h: &HermitianMatrix) -> EigenDecomposition {
    let n = h.dim();
    let se = h.0.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = se.eigenvectors.column(src).into_owned();
        fix_phase(&mut col);
        eigenvectors.set_column(dst, &col);
    }
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// Validating entry point for raw matrices.
pub fn eigh(m: &CMatrix) -> Result<EigenDecomposition> {
    Ok(hermitian_eig(&HermitianMatrix::new(m.clone())?))
}

/// Rotates `v` by a global phase so its largest-magnitude entry is real positive.
pub fn fix_phase(v: &mut CVector) {
    let mut best = 0usize;
    let mut best_mag = -1.0f64;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm_sqr();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    if best_mag > 0.0 {
        let z = v[best];
        let phase = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= phase;
        }
        v[best] = c(v[best].norm(), 0.0);
    }
}

/// `Tr(a^dagger b)` for square matrices of equal size.
pub fn trace_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Hilbert-Schmidt inner product `Tr(a^dagger b)`; real for Hermitian inputs.
pub fn frobenius_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<C64> {
    check_same_dim(a.dim(), b.dim())?;
    Ok(trace_inner(&a.0, &b.0))
}

/// `ab - ba`, anti-Hermitian when both inputs are Hermitian.
pub fn commutator(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<CMatrix> {
    check_same_dim(a.dim(), b.dim())?;
    Ok(commutator_raw(&a.0, &b.0))
}

pub(crate) fn commutator_raw(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

fn check_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// GUE-style random Hermitian matrix: real standard-normal diagonal, complex
/// off-diagonal entries with unit total variance.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    HermitianMatrix::from_upper_fn(n, |i, j| {
        if i == j {
            c(rng.sample(StandardNormal), 0.0)
        } else {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c(s * re, s * im)
        }
    })
}

/// Pauli matrices `(sigma_x, sigma_y, sigma_z)`.
pub fn pauli() -> [HermitianMatrix; 3] {
    let z = C64::default();
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        HermitianMatrix(CMatrix::from_row_slice(2, 2, &[z, one, one, z])),
        HermitianMatrix(CMatrix::from_row_slice(2, 2, &[z, -i, i, z])),
        HermitianMatrix(CMatrix::from_row_slice(2, 2, &[one, z, z, -one])),
    ]
}
