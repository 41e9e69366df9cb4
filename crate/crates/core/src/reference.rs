//! Closed-form configurations: fuzzy sphere, fuzzy CP^{N-1}, fuzzy torus and
//! commuting (classical) point sets.

use std::f64::consts::PI;

use crate::configuration::MatrixConfiguration;
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, HermitianMatrix, C64};

/// Spin `j = two_j / 2`, represented on `N = two_j + 1` states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpinLabel {
    two_j: u32,
}

impl SpinLabel {
    pub fn new(two_j: u32) -> Result<Self> {
        if two_j == 0 {
            return Err(Error::Validation("spin label needs two_j >= 1".into()));
        }
        Ok(Self { two_j })
    }

    /// The spin whose representation has dimension `n`.
    pub fn from_dim(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Validation(format!(
                "spin representation needs N >= 2, got {n}"
            )));
        }
        Self::new((n - 1) as u32)
    }

    pub fn two_j(self) -> u32 {
        self.two_j
    }

    pub fn j(self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.two_j as usize + 1
    }
}

/// `(J_1, J_2, J_3)` in the basis `m = j, j-1, ..., -j`, with `J_3` diagonal.
pub fn angular_momentum(spin: SpinLabel) -> [HermitianMatrix; 3] {
    let n = spin.dim();
    let j = spin.j();
    let m = |k: usize| j - k as f64;
    // <m+1| J_+ |m>, stored at row k-1, column k
    let raise = |k: usize| (j * (j + 1.0) - m(k) * (m(k) + 1.0)).max(0.0).sqrt();
    let j1 = HermitianMatrix::from_upper_fn(n, |r, col| {
        if col == r + 1 {
            c(0.5 * raise(col), 0.0)
        } else {
            C64::default()
        }
    });
    let j2 = HermitianMatrix::from_upper_fn(n, |r, col| {
        if col == r + 1 {
            c(0.0, -0.5 * raise(col))
        } else {
            C64::default()
        }
    });
    let j3 = HermitianMatrix::from_real_diagonal(&(0..n).map(m).collect::<Vec<_>>());
    [j1, j2, j3]
}

/// `X_a = alpha J_a`.
pub fn fuzzy_sphere(spin: SpinLabel, alpha: f64) -> Result<MatrixConfiguration> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Validation(format!(
            "fuzzy sphere scale must be positive, got {alpha}"
        )));
    }
    MatrixConfiguration::new(
        angular_momentum(spin)
            .iter()
            .map(|x| x.scale(alpha))
            .collect(),
    )
}

/// Generalized Gell-Mann matrices of `su(N)`, normalized to `Tr(l_a l_b) = 2 delta_ab`.
///
/// Order: symmetric `E_jk + E_kj`, antisymmetric `-i E_jk + i E_kj` (both over
/// `j < k` lexicographically), then the `N - 1` diagonal ones.
pub fn gell_mann(n: usize) -> Result<Vec<HermitianMatrix>> {
    if n < 2 {
        return Err(Error::Validation(format!(
            "Gell-Mann basis needs N >= 2, got {n}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (j + 1..n).map(move |k| (j, k)))
        .collect();
    let mut out = Vec::with_capacity(n * n - 1);
    for &(j, k) in &pairs {
        let mut m = CMatrix::zeros(n, n);
        m[(j, k)] = c(1.0, 0.0);
        m[(k, j)] = c(1.0, 0.0);
        out.push(HermitianMatrix::from_hermitian_part(&m));
    }
    for &(j, k) in &pairs {
        let mut m = CMatrix::zeros(n, n);
        m[(j, k)] = c(0.0, -1.0);
        m[(k, j)] = c(0.0, 1.0);
        out.push(HermitianMatrix::from_hermitian_part(&m));
    }
    for l in 1..n {
        let s = (2.0 / (l * (l + 1)) as f64).sqrt();
        let diag: Vec<f64> = (0..n)
            .map(|i| match i.cmp(&l) {
                std::cmp::Ordering::Less => s,
                std::cmp::Ordering::Equal => -(l as f64) * s,
                std::cmp::Ordering::Greater => 0.0,
            })
            .collect();
        out.push(HermitianMatrix::from_real_diagonal(&diag));
    }
    Ok(out)
}

/// Minimal fuzzy `CP^{N-1}`: the `N^2 - 1` Gell-Mann matrices.
pub fn fuzzy_cpn(n: usize) -> Result<MatrixConfiguration> {
    MatrixConfiguration::new(gell_mann(n)?)
}

/// Clock `U = diag(q^k)` and shift `V|k> = |k+1 mod N>` with `q = e^{2 pi i / N}`,
/// so `U V = q V U`.
pub fn clock_shift(n: usize) -> Result<(CMatrix, CMatrix)> {
    if n < 2 {
        return Err(Error::Validation(format!(
            "fuzzy torus needs N >= 2, got {n}"
        )));
    }
    let u = CMatrix::from_fn(n, n, |r, col| {
        if r == col {
            C64::from_polar(1.0, 2.0 * PI * r as f64 / n as f64)
        } else {
            C64::default()
        }
    });
    let v = CMatrix::from_fn(n, n, |r, col| {
        if r == (col + 1) % n {
            c(1.0, 0.0)
        } else {
            C64::default()
        }
    });
    Ok((u, v))
}

/// `X_1 + i X_2 = U`, `X_3 + i X_4 = V`.
pub fn fuzzy_torus(n: usize) -> Result<MatrixConfiguration> {
    let (u, v) = clock_shift(n)?;
    let i = c(0.0, 1.0);
    let mut obs = Vec::with_capacity(4);
    for w in [u, v] {
        let wd = w.adjoint();
        obs.push(HermitianMatrix::from_hermitian_part(&(&w + &wd).scale(0.5)));
        obs.push(HermitianMatrix::from_hermitian_part(
            &((&w - &wd) / (i * 2.0)),
        ));
    }
    MatrixConfiguration::new(obs)
}

/// `X_a = diag(p_1[a], ..., p_N[a])`: a classical configuration whose
/// quasi-coherent states are the indicator vectors of the nearest point.
pub fn commuting_config(points: &[Vec<f64>]) -> Result<MatrixConfiguration> {
    let first = points.first().ok_or_else(|| {
        Error::Validation("commuting configuration needs at least one point".into())
    })?;
    let d = first.len();
    if d == 0 {
        return Err(Error::Validation(
            "points must have at least one coordinate".into(),
        ));
    }
    for p in points {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.len(),
            });
        }
    }
    MatrixConfiguration::new(
        (0..d)
            .map(|a| {
                HermitianMatrix::from_real_diagonal(
                    &points.iter().map(|p| p[a]).collect::<Vec<_>>(),
                )
            })
            .collect(),
    )
}
