//! Matrix configurations `{X_1, ..., X_D}` and their JSON file format.
//!
//! File layout:
//!
//! ```json
//! { "hilbert_dim": N, "feature_dim": D,
//!   "observables": [ [[re, im], ...N*N entries, row-major...], ...D matrices... ] }
//! ```
//!
//! Numbers are written in shortest round-trip form, so a save/load cycle is
//! bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, HermitianMatrix};

/// `D` Hermitian observables sharing one Hilbert space of dimension `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixConfiguration {
    observables: Vec<HermitianMatrix>,
}

impl MatrixConfiguration {
    pub fn new(observables: Vec<HermitianMatrix>) -> Result<Self> {
        let first = observables.first().ok_or_else(|| {
            Error::Validation("a configuration needs at least one observable".into())
        })?;
        let n = first.dim();
        for x in &observables {
            if x.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: x.dim(),
                });
            }
        }
        Ok(Self { observables })
    }

    pub fn hilbert_dim(&self) -> usize {
        self.observables[0].dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.observables.len()
    }

    pub fn observables(&self) -> &[HermitianMatrix] {
        &self.observables
    }

    pub fn observable(&self, a: usize) -> &HermitianMatrix {
        &self.observables[a]
    }

    pub fn into_observables(self) -> Vec<HermitianMatrix> {
        self.observables
    }

    /// `sum_a X_a^2`.
    pub fn sum_of_squares(&self) -> HermitianMatrix {
        let n = self.hilbert_dim();
        let mut s = CMatrix::zeros(n, n);
        for x in &self.observables {
            s += x.matrix() * x.matrix();
        }
        HermitianMatrix::from_hermitian_part(&s)
    }

    /// `X_a -> X_a + shift_a * I`.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        self.check_point(shift)?;
        Ok(Self {
            observables: self
                .observables
                .iter()
                .zip(shift)
                .map(|(x, &s)| x.shifted(s))
                .collect(),
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            observables: self.observables.iter().map(|x| x.scale(s)).collect(),
        }
    }

    /// Errors unless `x` has one coordinate per observable.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ConfigurationFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ConfigurationFile>(s)?.try_into()
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Serialized form of a [`MatrixConfiguration`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfigurationFile {
    pub hilbert_dim: usize,
    pub feature_dim: usize,
    pub observables: Vec<Vec<[f64; 2]>>,
}

impl From<&MatrixConfiguration> for ConfigurationFile {
    fn from(cfg: &MatrixConfiguration) -> Self {
        let n = cfg.hilbert_dim();
        let observables = cfg
            .observables()
            .iter()
            .map(|x| {
                let m = x.matrix();
                (0..n * n)
                    .map(|k| {
                        let z = m[(k / n, k % n)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        Self {
            hilbert_dim: n,
            feature_dim: cfg.feature_dim(),
            observables,
        }
    }
}

impl TryFrom<ConfigurationFile> for MatrixConfiguration {
    type Error = Error;

    fn try_from(f: ConfigurationFile) -> Result<Self> {
        let n = f.hilbert_dim;
        if n == 0 {
            return Err(Error::Validation("hilbert_dim must be >= 1".into()));
        }
        if f.observables.len() != f.feature_dim {
            return Err(Error::Validation(format!(
                "feature_dim is {} but {} observables are present",
                f.feature_dim,
                f.observables.len()
            )));
        }
        let observables = f
            .observables
            .iter()
            .enumerate()
            .map(|(a, entries)| {
                if entries.len() != n * n {
                    return Err(Error::Validation(format!(
                        "observable {a} has {} entries, expected {}",
                        entries.len(),
                        n * n
                    )));
                }
                let m = CMatrix::from_fn(n, n, |i, j| {
                    let [re, im] = entries[i * n + j];
                    c(re, im)
                });
                HermitianMatrix::new(m)
            })
            .collect::<Result<Vec<_>>>()?;
        MatrixConfiguration::new(observables)
    }
}
