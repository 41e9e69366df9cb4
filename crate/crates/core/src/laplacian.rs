//! The matrix Laplacian `Delta(Y) = sum_a [X_a, [X_a, Y]]`, its Hermitian
//! eigenmaps, zero-mode components, Weyl-law dimension fits, and related
//! diagnostics.
//!
//! Matrices are vectorized row-major: `Y_ij` sits at index `i * N + j`.

use std::ops::Range;

use rand::Rng;

use crate::coherent::QuasiCoherentState;
use crate::configuration::MatrixConfiguration;
use crate::error::{Error, Result};
use crate::linalg::{
    c, commutator_raw, hermitian_eig, trace_inner, CMatrix, CVector, HermitianMatrix, C64,
};
use crate::seeded_rng;

/// Eigenvalues closer than `LEVEL_REL * max(1, lambda_max)` are treated as one level.
pub const LEVEL_REL: f64 = 1e-8;

/// Default zero-mode threshold: `ZERO_MODE_REL * median eigenvalue`.
pub const ZERO_MODE_REL: f64 = 1e-3;

/// Idempotency tolerance for extracted component projectors.
pub const PROJECTOR_TOL: f64 = 1e-4;

/// `Delta` as an `N^2 x N^2` Hermitian matrix:
/// `sum_a (X_a (x) I - I (x) X_a^T)^2`, entry `((i,j),(k,l))` equal to
/// `S_ik d_jl + d_ik S_lj - 2 sum_a X_a,ik X_a,lj` with `S = sum_a X_a^2`.
pub fn matrix_laplacian(cfg: &MatrixConfiguration) -> HermitianMatrix {
    let n = cfg.hilbert_dim();
    let s = cfg.sum_of_squares();
    let s = s.matrix();
    let mut l = CMatrix::zeros(n * n, n * n);
    for x in cfg.observables() {
        let x = x.matrix();
        for i in 0..n {
            for k in 0..n {
                let xik = x[(i, k)] * 2.0;
                if xik == C64::default() {
                    continue;
                }
                for j in 0..n {
                    for m in 0..n {
                        l[(i * n + j, k * n + m)] -= xik * x[(m, j)];
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                l[(i * n + j, k * n + j)] += s[(i, k)];
                l[(i * n + j, i * n + k)] += s[(k, j)];
            }
        }
    }
    HermitianMatrix::from_hermitian_part(&l)
}

/// `sum_a [X_a, [X_a, Y]]` evaluated directly.
pub fn apply_laplacian(cfg: &MatrixConfiguration, y: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(y.nrows(), y.ncols());
    for x in cfg.observables() {
        out += commutator_raw(x.matrix(), &commutator_raw(x.matrix(), y));
    }
    out
}

/// `E[Y] = sum_a Tr([X_a, Y]^dagger [X_a, Y])`.
pub fn laplacian_energy(cfg: &MatrixConfiguration, y: &HermitianMatrix) -> Result<f64> {
    if y.dim() != cfg.hilbert_dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.hilbert_dim(),
            found: y.dim(),
        });
    }
    Ok(cfg
        .observables()
        .iter()
        .map(|x| commutator_raw(x.matrix(), y.matrix()).norm_squared())
        .sum())
}

/// Spectrum of `Delta` with an orthonormal basis of Hermitian eigenmaps.
#[derive(Clone, Debug)]
pub struct LaplacianAnalysis {
    pub dim: usize,
    /// Ascending, length `N^2`.
    pub eigenvalues: Vec<f64>,
    /// `Y_i` with `Tr(Y_i Y_j) = delta_ij`; `Y_0 = I / sqrt(N)`.
    pub eigenmaps: Vec<HermitianMatrix>,
}

impl LaplacianAnalysis {
    pub fn level_tolerance(&self) -> f64 {
        LEVEL_REL * self.eigenvalues.last().copied().unwrap_or(0.0).max(1.0)
    }

    /// `ZERO_MODE_REL` times the median eigenvalue.
    pub fn default_zero_tolerance(&self) -> f64 {
        let v = &self.eigenvalues;
        let m = v.len();
        let median = if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        };
        ZERO_MODE_REL * median.max(0.0)
    }

    pub fn zero_mode_count(&self, tol_zero: f64) -> usize {
        self.eigenvalues
            .iter()
            .take_while(|&&l| l <= tol_zero)
            .count()
    }

    /// Runs of equal eigenvalues as index ranges.
    pub fn levels(&self) -> Vec<Range<usize>> {
        group_levels(&self.eigenvalues, self.level_tolerance())
    }
}

fn group_levels(values: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] > tol {
            out.push(start..k);
            start = k;
        }
    }
    out
}

fn unvec(v: &CVector, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| v[i * n + j])
}

/// Real inner product `Tr(A B)` of Hermitian matrices.
fn herm_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    trace_inner(a, b).re
}

/// Fixes the sign of a Hermitian eigenmap: positive trace, or else a
/// positive leading component of its largest entry.
fn fix_sign(y: &mut CMatrix) {
    let scale = y.norm().max(f64::MIN_POSITIVE);
    let tr = y.trace().re;
    let negative = if tr.abs() > 1e-10 * scale {
        tr < 0.0
    } else {
        let mut best = C64::default();
        for i in 0..y.nrows() {
            for j in 0..y.ncols() {
                if y[(i, j)].norm() > best.norm() * (1.0 + 1e-9) {
                    best = y[(i, j)];
                }
            }
        }
        if best.re.abs() > 1e-10 * scale {
            best.re < 0.0
        } else {
            best.im < 0.0
        }
    };
    if negative {
        y.neg_mut();
    }
}

/// Picks `count` orthonormal Hermitian matrices spanning the candidates,
/// always taking the candidate with the largest residual next.
fn hermitian_basis(
    mut candidates: Vec<CMatrix>,
    seed: Option<CMatrix>,
    count: usize,
) -> Vec<CMatrix> {
    let mut basis: Vec<CMatrix> = Vec::with_capacity(count);
    if let Some(s) = seed {
        basis.push(s);
    }
    while basis.len() < count && !candidates.is_empty() {
        for cand in candidates.iter_mut() {
            // two passes of Gram-Schmidt
            for _ in 0..2 {
                for b in &basis {
                    let p = herm_inner(b, cand);
                    *cand -= b * c(p, 0.0);
                }
            }
        }
        let (best, norm) = candidates
            .iter()
            .enumerate()
            .map(|(k, m)| (k, m.norm()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if norm < 1e-6 {
            break;
        }
        let b = candidates.swap_remove(best) / c(norm, 0.0);
        basis.push(b);
    }
    basis
}

/// Full eigendecomposition of `Delta`. Each eigenspace is re-based to
/// orthonormal Hermitian matrices built from the Hermitian and
/// anti-Hermitian parts of the superoperator eigenvectors; the first
/// eigenmap is `I / sqrt(N)`.
pub fn laplacian_spectrum(cfg: &MatrixConfiguration) -> Result<LaplacianAnalysis> {
    let n = cfg.hilbert_dim();
    let e = hermitian_eig(&matrix_laplacian(cfg));
    let tol = LEVEL_REL * e.eigenvalues.last().copied().unwrap_or(0.0).max(1.0);
    let i_unit = c(0.0, 1.0);
    let mut eigenmaps = Vec::with_capacity(n * n);
    for (li, level) in group_levels(&e.eigenvalues, tol).into_iter().enumerate() {
        let mut candidates = Vec::with_capacity(2 * level.len());
        for k in level.clone() {
            let v = unvec(&e.eigenvectors.column(k).into_owned(), n);
            let vd = v.adjoint();
            candidates.push((&v + &vd) * c(0.5, 0.0));
            candidates.push((&v - &vd) / (i_unit * 2.0));
        }
        let seed = (li == 0).then(|| CMatrix::identity(n, n) / c((n as f64).sqrt(), 0.0));
        let mut basis = hermitian_basis(candidates, seed, level.len());
        if basis.len() != level.len() {
            return Err(Error::Numeric(format!(
                "could not build a Hermitian basis for the eigenspace at {:e}",
                e.eigenvalues[level.start]
            )));
        }
        for b in basis.iter_mut() {
            fix_sign(b);
            eigenmaps.push(HermitianMatrix::from_hermitian_part(b));
        }
    }
    Ok(LaplacianAnalysis {
        dim: n,
        eigenvalues: e.eigenvalues,
        eigenmaps,
    })
}

/// Block projectors recovered from the zero modes of `Delta`.
#[derive(Clone, Debug)]
pub struct ComponentDecomposition {
    pub projectors: Vec<HermitianMatrix>,
    /// `||sum_j P_j - I||_2`
    pub residual: f64,
    /// Largest `||P_j^2 - P_j||_2`.
    pub idempotency_defect: f64,
}

impl ComponentDecomposition {
    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }
}

/// Splits the space into components using the `k` eigenmaps with eigenvalue
/// `<= tol_zero` (default [`LaplacianAnalysis::default_zero_tolerance`]).
///
/// A random real combination of the zero modes is diagonalized, its spectrum
/// cut into `k` groups at the `k - 1` widest gaps, and the spectral
/// projector of each group is projected back onto the zero space. When the
/// zero space is spanned by block projectors these are the blocks.
pub fn zero_mode_components(
    analysis: &LaplacianAnalysis,
    tol_zero: Option<f64>,
) -> Result<ComponentDecomposition> {
    let n = analysis.dim;
    let tol = tol_zero.unwrap_or_else(|| analysis.default_zero_tolerance());
    let k = analysis.zero_mode_count(tol).max(1);
    let modes = &analysis.eigenmaps[..k];
    let mut rng = seeded_rng(0x2e50_70de);
    let mut mix = CMatrix::zeros(n, n);
    for z in modes {
        mix += z.matrix() * c(rng.random_range(-1.0..1.0), 0.0);
    }
    let e = hermitian_eig(&HermitianMatrix::from_hermitian_part(&mix));
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.sort_by(|&a, &b| {
        let ga = e.eigenvalues[a] - e.eigenvalues[a - 1];
        let gb = e.eigenvalues[b] - e.eigenvalues[b - 1];
        gb.total_cmp(&ga).then(a.cmp(&b))
    });
    let mut bounds: Vec<usize> = cuts.into_iter().take(k - 1).collect();
    bounds.push(0);
    bounds.push(n);
    bounds.sort_unstable();
    bounds.dedup();

    let mut projectors = Vec::with_capacity(k);
    let mut defect: f64 = 0.0;
    let mut total = CMatrix::zeros(n, n);
    for w in bounds.windows(2) {
        let mut p = CMatrix::zeros(n, n);
        for col in w[0]..w[1] {
            let v = e.eigenvectors.column(col);
            p += v * v.adjoint();
        }
        let mut proj = CMatrix::zeros(n, n);
        for z in modes {
            proj += z.matrix() * c(herm_inner(z.matrix(), &p), 0.0);
        }
        defect = defect.max((&proj * &proj - &proj).norm());
        total += &proj;
        projectors.push(HermitianMatrix::from_hermitian_part(&proj));
    }
    if defect > PROJECTOR_TOL {
        return Err(Error::NonProjector(defect));
    }
    let residual = (total - CMatrix::identity(n, n)).norm();
    Ok(ComponentDecomposition {
        projectors,
        residual,
        idempotency_defect: defect,
    })
}

/// Least-squares fit of `log N(lambda)` against `log lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeylFit {
    /// `2 * slope`
    pub dimension: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Eigenvalue indices that entered the fit.
    pub window: Range<usize>,
    /// Distinct eigenvalue levels used as fit points.
    pub levels: usize,
}

/// Default fit window: skip the zero modes and the next `N` eigenvalues
/// (infrared), stop before the top quarter of the spectrum (ultraviolet).
pub fn default_weyl_window(analysis: &LaplacianAnalysis) -> Range<usize> {
    let k0 = analysis
        .zero_mode_count(analysis.default_zero_tolerance())
        .max(1);
    let total = analysis.eigenvalues.len();
    let end = (3 * total) / 4;
    (k0 + analysis.dim).min(end)..end
}

/// Weyl-law dimension fit over the eigenvalue indices in `window`
/// (default [`default_weyl_window`]). Each distinct level contributes one
/// point `(log lambda, log #{eigenvalues <= lambda})`.
pub fn weyl_fit(analysis: &LaplacianAnalysis, window: Option<Range<usize>>) -> Result<WeylFit> {
    let window = window.unwrap_or_else(|| default_weyl_window(analysis));
    let total = analysis.eigenvalues.len();
    if window.end > total || window.start > window.end {
        return Err(Error::Validation(format!(
            "fit window {window:?} outside 0..{total}"
        )));
    }
    let tol = analysis.level_tolerance();
    let zero_tol = analysis.default_zero_tolerance().max(tol);
    let values: Vec<f64> = analysis.eigenvalues[window.clone()]
        .iter()
        .copied()
        .filter(|&l| l > zero_tol)
        .collect();
    if values.len() < 10 {
        return Err(Error::Fit(format!(
            "{} nonzero eigenvalues in the fit window, need at least 10",
            values.len()
        )));
    }
    let mut points = Vec::new();
    for level in group_levels(&values, tol) {
        let lambda = values[level.end - 1];
        let count = analysis
            .eigenvalues
            .iter()
            .filter(|&&l| l <= lambda + tol)
            .count();
        points.push((lambda.ln(), (count as f64).ln()));
    }
    if points.len() < 3 {
        return Err(Error::Fit(format!(
            "only {} distinct eigenvalue levels in the fit window, need at least 3",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("fit points have no spread in log lambda".into()));
    }
    let slope = sxy / sxx;
    Ok(WeylFit {
        dimension: 2.0 * slope,
        slope,
        intercept: my - slope * mx,
        window,
        levels: points.len(),
    })
}

pub fn weyl_dimension(analysis: &LaplacianAnalysis, window: Option<Range<usize>>) -> Result<f64> {
    Ok(weyl_fit(analysis, window)?.dimension)
}

/// `b[a][i] = Tr(Y_i X_a)`: rows are features, columns eigenmaps.
pub fn eigenmap_overlap(
    analysis: &LaplacianAnalysis,
    cfg: &MatrixConfiguration,
) -> Result<Vec<Vec<f64>>> {
    check_dim(analysis, cfg)?;
    Ok(cfg
        .observables()
        .iter()
        .map(|x| {
            analysis
                .eigenmaps
                .iter()
                .map(|y| herm_inner(y.matrix(), x.matrix()))
                .collect()
        })
        .collect())
}

fn check_dim(analysis: &LaplacianAnalysis, cfg: &MatrixConfiguration) -> Result<()> {
    if analysis.dim != cfg.hilbert_dim() {
        return Err(Error::DimensionMismatch {
            expected: analysis.dim,
            found: cfg.hilbert_dim(),
        });
    }
    Ok(())
}

fn check_modes(analysis: &LaplacianAnalysis, n_modes: usize, min: usize) -> Result<()> {
    let total = analysis.eigenmaps.len();
    if n_modes < min || n_modes > total {
        return Err(Error::Validation(format!(
            "mode count must lie in {min}..={total}, got {n_modes}"
        )));
    }
    Ok(())
}

/// Orthogonal projection of each `X_a` onto `span(Y_0, ..., Y_{n-1})`.
pub fn project_observables(
    cfg: &MatrixConfiguration,
    analysis: &LaplacianAnalysis,
    n_modes: usize,
) -> Result<MatrixConfiguration> {
    check_dim(analysis, cfg)?;
    check_modes(analysis, n_modes, 1)?;
    let n = cfg.hilbert_dim();
    MatrixConfiguration::new(
        cfg.observables()
            .iter()
            .map(|x| {
                let mut out = CMatrix::zeros(n, n);
                for y in &analysis.eigenmaps[..n_modes] {
                    out += y.matrix() * c(herm_inner(y.matrix(), x.matrix()), 0.0);
                }
                HermitianMatrix::from_hermitian_part(&out)
            })
            .collect(),
    )
}

/// The configuration `{Y_1, ..., Y_n}` of the first non-trivial eigenmaps.
pub fn reduced_configuration(
    analysis: &LaplacianAnalysis,
    n_modes: usize,
) -> Result<MatrixConfiguration> {
    check_modes(analysis, n_modes, 1)?;
    if n_modes >= analysis.eigenmaps.len() {
        return Err(Error::Validation(format!(
            "at most {} non-trivial modes exist",
            analysis.eigenmaps.len() - 1
        )));
    }
    MatrixConfiguration::new(analysis.eigenmaps[1..=n_modes].to_vec())
}

/// Matrix Laplacian of [`reduced_configuration`].
pub fn reduced_laplacian(analysis: &LaplacianAnalysis, n_modes: usize) -> Result<HermitianMatrix> {
    Ok(matrix_laplacian(&reduced_configuration(analysis, n_modes)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfigurationClass {
    Classical,
    AlmostCommutative,
    DeepQuantum,
}

impl std::fmt::Display for ConfigurationClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Classical => "classical",
            Self::AlmostCommutative => "almost-commutative",
            Self::DeepQuantum => "deep-quantum",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Classification {
    pub class: ConfigurationClass,
    /// `max_{a<b} ||[X_a, X_b]||_2 / ||X_a X_b||_2`
    pub ratio: f64,
}

pub const CLASSICAL_RATIO: f64 = 1e-6;
pub const DEEP_QUANTUM_RATIO: f64 = 1.0;

pub fn classify_configuration(cfg: &MatrixConfiguration) -> Result<Classification> {
    let d = cfg.feature_dim();
    if d < 2 {
        return Err(Error::Validation(
            "classification needs at least two observables".into(),
        ));
    }
    let obs = cfg.observables();
    let mut ratio: f64 = 0.0;
    for a in 0..d {
        for b in a + 1..d {
            let prod = (obs[a].matrix() * obs[b].matrix()).norm();
            let comm = commutator_raw(obs[a].matrix(), obs[b].matrix()).norm();
            if prod > 0.0 {
                ratio = ratio.max(comm / prod);
            }
        }
    }
    let class = if ratio <= CLASSICAL_RATIO {
        ConfigurationClass::Classical
    } else if ratio >= DEEP_QUANTUM_RATIO {
        ConfigurationClass::DeepQuantum
    } else {
        ConfigurationClass::AlmostCommutative
    };
    Ok(Classification { class, ratio })
}

/// `-Tr(y^2 ln y^2)` for a normalized Hermitian `y`.
pub fn observable_entropy(y: &HermitianMatrix) -> Result<f64> {
    let norm = y.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Validation(format!(
            "observable must have unit norm, got {norm}"
        )));
    }
    Ok(hermitian_eig(y)
        .eigenvalues
        .iter()
        .map(|l| l * l)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}

/// `Tr(rho Y rho Y)` with `rho` the average projector onto the states.
pub fn nonlocal_correlation(states: &[QuasiCoherentState], y: &HermitianMatrix) -> Result<f64> {
    let first = states
        .first()
        .ok_or_else(|| Error::Validation("need at least one state".into()))?;
    let n = first.vector.len();
    if y.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.dim(),
        });
    }
    let mut rho = CMatrix::zeros(n, n);
    for s in states {
        if s.vector.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.vector.len(),
            });
        }
        rho += &s.vector * s.vector.adjoint();
    }
    rho /= c(states.len() as f64, 0.0);
    let ry = &rho * y.matrix();
    Ok((&ry * &ry).trace().re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli, random_hermitian};
    use crate::reference::{
        angular_momentum, commuting_config, fuzzy_cpn, fuzzy_sphere, fuzzy_torus, SpinLabel,
    };
    use std::f64::consts::PI;

    fn spin(two_j: u32) -> MatrixConfiguration {
        fuzzy_sphere(SpinLabel::new(two_j).unwrap(), 1.0).unwrap()
    }

    fn random_config(seed: u64, n: usize, d: usize) -> MatrixConfiguration {
        let mut rng = seeded_rng(seed);
        MatrixConfiguration::new((0..d).map(|_| random_hermitian(n, &mut rng)).collect()).unwrap()
    }

    /// Block-diagonal sum of configurations with equal feature dimension.
    fn direct_sum(parts: &[MatrixConfiguration]) -> MatrixConfiguration {
        let n: usize = parts.iter().map(|p| p.hilbert_dim()).sum();
        let d = parts[0].feature_dim();
        MatrixConfiguration::new(
            (0..d)
                .map(|a| {
                    let mut m = CMatrix::zeros(n, n);
                    let mut off = 0;
                    for p in parts {
                        let k = p.hilbert_dim();
                        m.view_mut((off, off), (k, k))
                            .copy_from(p.observable(a).matrix());
                        off += k;
                    }
                    HermitianMatrix::new(m).unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    fn vec_of(y: &CMatrix) -> CVector {
        let n = y.nrows();
        CVector::from_fn(n * n, |k, _| y[(k / n, k % n)])
    }

    #[test]
    fn superoperator_matches_double_commutator() {
        let cfg = random_config(1, 5, 3);
        let l = matrix_laplacian(&cfg);
        let mut rng = seeded_rng(2);
        for _ in 0..5 {
            let y = CMatrix::from_fn(5, 5, |_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let direct = apply_laplacian(&cfg, &y);
            assert!((l.matrix() * vec_of(&y) - vec_of(&direct)).norm() < 1e-12);
        }
        assert!(apply_laplacian(&cfg, &CMatrix::identity(5, 5)).norm() < 1e-13);
    }

    #[test]
    fn commuting_laplacian_is_diagonal_in_matrix_units() {
        let pts = vec![vec![0.0, 1.0], vec![2.0, 0.5], vec![-1.0, -1.0]];
        let cfg = commuting_config(&pts).unwrap();
        let l = matrix_laplacian(&cfg);
        for i in 0..3 {
            for j in 0..3 {
                let expect: f64 = (0..2).map(|a| (pts[i][a] - pts[j][a]).powi(2)).sum();
                for k in 0..9 {
                    let want = if k == i * 3 + j { expect } else { 0.0 };
                    assert!((l.matrix()[(i * 3 + j, k)] - c(want, 0.0)).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn spin_half_spectrum() {
        let a = laplacian_spectrum(&spin(1)).unwrap();
        for (l, e) in a.eigenvalues.iter().zip([0.0, 2.0, 2.0, 2.0]) {
            assert!((l - e).abs() < 1e-12);
        }
    }

    #[test]
    fn spin_three_halves_spectrum() {
        let a = laplacian_spectrum(&spin(3)).unwrap();
        let levels = a.levels();
        let mult: Vec<usize> = levels.iter().map(|r| r.len()).collect();
        assert_eq!(mult, vec![1, 3, 5, 7]);
        for (l, r) in levels.iter().enumerate() {
            for k in r.clone() {
                assert!((a.eigenvalues[k] - (l * (l + 1)) as f64).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn eigenmaps_are_orthonormal_hermitian_eigenvectors() {
        for cfg in [
            spin(3),
            random_config(4, 4, 3),
            fuzzy_torus(3).unwrap(),
            direct_sum(&[spin(1), spin(2)]),
        ] {
            let a = laplacian_spectrum(&cfg).unwrap();
            let n = cfg.hilbert_dim();
            assert_eq!(a.eigenmaps.len(), n * n);
            let id = CMatrix::identity(n, n) / c((n as f64).sqrt(), 0.0);
            assert!((a.eigenmaps[0].matrix() - id).norm() < 1e-12);
            for (i, yi) in a.eigenmaps.iter().enumerate() {
                let r = apply_laplacian(&cfg, yi.matrix()) - yi.matrix() * c(a.eigenvalues[i], 0.0);
                assert!(r.norm() < 1e-9 * a.eigenvalues.last().unwrap().max(1.0));
                for (j, yj) in a.eigenmaps.iter().enumerate() {
                    let g = trace_inner(yi.matrix(), yj.matrix());
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g - c(want, 0.0)).norm() < 1e-8);
                }
            }
            assert!(a.eigenvalues[0] >= -1e-8 * a.eigenvalues.last().unwrap());
        }
    }

    #[test]
    fn eigenmaps_are_deterministic() {
        let cfg = random_config(8, 4, 2);
        let a = laplacian_spectrum(&cfg).unwrap();
        let b = laplacian_spectrum(&cfg).unwrap();
        assert_eq!(a.eigenmaps, b.eigenmaps);
    }

    #[test]
    fn torus_spectrum_matches_q_numbers() {
        for n in [3usize, 4, 5] {
            let a = laplacian_spectrum(&fuzzy_torus(n).unwrap()).unwrap();
            let s = |k: usize| (PI * k as f64 / n as f64).sin().powi(2);
            let mut expect: Vec<f64> = (0..n)
                .flat_map(|p| (0..n).map(move |q| 4.0 * (s(p) + s(q))))
                .collect();
            expect.sort_by(f64::total_cmp);
            for (l, e) in a.eigenvalues.iter().zip(&expect) {
                assert!((l - e).abs() < 1e-10);
            }
            // proportional to [p]_q^2 + [q]_q^2 with [k]_q = sin(k pi / N) / sin(pi / N)
            let unit = 4.0 * s(1);
            assert!((a.eigenvalues[1] - unit).abs() < 1e-10);
        }
        let a = laplacian_spectrum(&fuzzy_torus(4).unwrap()).unwrap();
        assert_eq!(a.levels()[1].len(), 4);
    }

    #[test]
    fn components_of_direct_sums() {
        let shifted = spin(1).translated(&[0.0, 0.0, 3.0]).unwrap();
        let cases = vec![
            (spin(3), 1),
            (direct_sum(&[spin(1), shifted.clone()]), 2),
            (direct_sum(&[spin(1), spin(2)]), 2),
            (direct_sum(&[spin(1), spin(2), shifted]), 3),
        ];
        for (cfg, k) in cases {
            let a = laplacian_spectrum(&cfg).unwrap();
            let tol = a.default_zero_tolerance();
            assert_eq!(a.zero_mode_count(tol), k);
            let comp = zero_mode_components(&a, None).unwrap();
            assert_eq!(comp.len(), k);
            assert!(comp.residual < 1e-6);
            for (i, p) in comp.projectors.iter().enumerate() {
                for (j, q) in comp.projectors.iter().enumerate() {
                    let prod = p.matrix() * q.matrix();
                    let want = if i == j {
                        p.matrix().clone()
                    } else {
                        CMatrix::zeros(cfg.hilbert_dim(), cfg.hilbert_dim())
                    };
                    assert!((prod - want).norm() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn two_spin_half_blocks_recovered() {
        let shifted = spin(1).translated(&[0.0, 0.0, 3.0]).unwrap();
        let a = laplacian_spectrum(&direct_sum(&[spin(1), shifted])).unwrap();
        let comp = zero_mode_components(&a, None).unwrap();
        let mut diags: Vec<Vec<i64>> = comp
            .projectors
            .iter()
            .map(|p| {
                (0..4)
                    .map(|i| p.matrix()[(i, i)].re.round() as i64)
                    .collect()
            })
            .collect();
        diags.sort();
        assert_eq!(diags, vec![vec![0, 0, 1, 1], vec![1, 1, 0, 0]]);
    }

    #[test]
    fn identical_blocks_are_not_of_projector_type() {
        // two copies of the same sphere: the commutant is a full 2x2 matrix
        // algebra, so there are 4 zero modes and no 4 orthogonal projectors
        let a = laplacian_spectrum(&direct_sum(&[spin(1), spin(1)])).unwrap();
        assert_eq!(a.zero_mode_count(a.default_zero_tolerance()), 4);
        assert!(matches!(
            zero_mode_components(&a, None),
            Err(Error::NonProjector(_))
        ));
    }

    #[test]
    fn weyl_fit_on_large_fuzzy_sphere() {
        let a = laplacian_spectrum(&spin(15)).unwrap();
        let d = weyl_dimension(&a, None).unwrap();
        assert!((1.5..=2.5).contains(&d), "d = {d}");
    }

    #[test]
    fn weyl_fit_on_commuting_chain() {
        let n = 24;
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64]).collect();
        let a = laplacian_spectrum(&commuting_config(&pts).unwrap()).unwrap();
        let d = weyl_dimension(&a, None).unwrap();
        assert!((d - 1.0).abs() < 0.35, "d = {d}");
    }

    #[test]
    fn weyl_fit_needs_enough_levels() {
        // minimal fuzzy CP^2 has only the trivial and the adjoint level
        let a = laplacian_spectrum(&fuzzy_cpn(3).unwrap()).unwrap();
        assert_eq!(a.levels().len(), 2);
        assert!(matches!(weyl_dimension(&a, None), Err(Error::Fit(_))));
        assert!(matches!(weyl_dimension(&a, Some(0..9)), Err(Error::Fit(_))));
        assert!(weyl_dimension(&a, Some(0..20)).is_err());
    }

    #[test]
    fn overlaps_and_projections() {
        let cfg = spin(3);
        let a = laplacian_spectrum(&cfg).unwrap();
        let b = eigenmap_overlap(&a, &cfg).unwrap();
        for (row, x) in b.iter().zip(cfg.observables()) {
            assert!(row[0].abs() < 1e-12);
            // J_a lie in the l = 1 eigenspace (indices 1..4)
            let inside: f64 = row[1..4].iter().map(|v| v * v).sum();
            assert!((inside - x.norm().powi(2)).abs() < 1e-9);
        }
        let same = project_observables(&cfg, &a, 4).unwrap();
        for (p, x) in same.observables().iter().zip(cfg.observables()) {
            assert!((p.matrix() - x.matrix()).norm() < 1e-8);
        }

        let cfg = random_config(5, 4, 3);
        let a = laplacian_spectrum(&cfg).unwrap();
        let full = project_observables(&cfg, &a, 16).unwrap();
        for (p, x) in full.observables().iter().zip(cfg.observables()) {
            assert!((p.matrix() - x.matrix()).norm() < 1e-10);
        }
        let one = project_observables(&cfg, &a, 1).unwrap();
        for (p, x) in one.observables().iter().zip(cfg.observables()) {
            let expect = CMatrix::identity(4, 4) * c(x.trace() / 4.0, 0.0);
            assert!((p.matrix() - expect).norm() < 1e-12);
        }
        let part = project_observables(&cfg, &a, 7).unwrap();
        let twice = project_observables(&part, &a, 7).unwrap();
        for ((p, q), x) in part
            .observables()
            .iter()
            .zip(twice.observables())
            .zip(cfg.observables())
        {
            assert!((p.matrix() - q.matrix()).norm() < 1e-10);
            assert!(p.norm() <= x.norm() + 1e-12);
        }
        assert!(project_observables(&cfg, &a, 0).is_err());
        assert!(project_observables(&cfg, &a, 17).is_err());
    }

    #[test]
    fn eigenmap_observable_has_unit_overlap_row() {
        let cfg = random_config(6, 3, 2);
        let a = laplacian_spectrum(&cfg).unwrap();
        let probe = MatrixConfiguration::new(vec![a.eigenmaps[4].scale(2.5)]).unwrap();
        let b = eigenmap_overlap(&a, &probe).unwrap();
        for (i, v) in b[0].iter().enumerate() {
            let want = if i == 4 { 2.5 } else { 0.0 };
            assert!((v - want).abs() < 1e-9);
        }
    }

    #[test]
    fn reduced_laplacians() {
        let cfg = spin(3);
        let a = laplacian_spectrum(&cfg).unwrap();
        assert!(reduced_configuration(&a, 0).is_err());
        let red = reduced_configuration(&a, 3).unwrap();
        let ra = laplacian_spectrum(&red).unwrap();
        let ratio = ra.eigenvalues[15] / a.eigenvalues[15];
        for (x, y) in ra.eigenvalues.iter().zip(&a.eigenvalues) {
            assert!((x - ratio * y).abs() < 1e-10);
        }
        assert_eq!(reduced_laplacian(&a, 3).unwrap().dim(), 16);

        let pts: Vec<Vec<f64>> = (0..4)
            .map(|i| vec![i as f64, (i * i) as f64 * 0.3])
            .collect();
        let a = laplacian_spectrum(&commuting_config(&pts).unwrap()).unwrap();
        let red = reduced_configuration(&a, 3).unwrap();
        for y in &a.eigenmaps[..4] {
            assert!(apply_laplacian(&red, y.matrix()).norm() < 1e-10);
        }
    }

    #[test]
    fn energy_quadratic_form() {
        let half = spin(1);
        assert!(
            laplacian_energy(&half, &HermitianMatrix::identity(2))
                .unwrap()
                .abs()
                < 1e-15
        );
        let sz = pauli()[2].scale(std::f64::consts::FRAC_1_SQRT_2);
        assert!((laplacian_energy(&half, &sz).unwrap() - 2.0).abs() < 1e-14);

        let cfg = random_config(7, 4, 3);
        let a = laplacian_spectrum(&cfg).unwrap();
        let mut rng = seeded_rng(3);
        for _ in 0..20 {
            let y = random_hermitian(4, &mut rng);
            let e = laplacian_energy(&cfg, &y).unwrap();
            let quad = trace_inner(y.matrix(), &apply_laplacian(&cfg, y.matrix())).re;
            assert!((e - quad).abs() < 1e-10 * e.max(1.0));
            let traceless = y.matrix() - CMatrix::identity(4, 4) * c(y.trace() / 4.0, 0.0);
            assert!(e >= a.eigenvalues[1] * traceless.norm_squared() - 1e-10);
        }
        assert!(laplacian_energy(&cfg, &HermitianMatrix::identity(2)).is_err());
    }

    /// Minimizes `E[Y]` over unit traceless Hermitian `Y` by projected descent,
    /// without any eigensolver.
    fn constrained_minimum(cfg: &MatrixConfiguration, seed: u64) -> f64 {
        let n = cfg.hilbert_dim();
        let mut rng = seeded_rng(seed);
        let mut y = random_hermitian(n, &mut rng).into_matrix();
        let scale: f64 = cfg
            .observables()
            .iter()
            .map(|x| x.norm().powi(2))
            .sum::<f64>();
        let step = 0.25 / scale;
        let normalize = |y: &mut CMatrix| {
            let tr = y.trace() / c(n as f64, 0.0);
            *y -= CMatrix::identity(n, n) * tr;
            let nn = y.norm();
            *y /= c(nn, 0.0);
        };
        normalize(&mut y);
        for _ in 0..200_000 {
            let g = apply_laplacian(cfg, &y);
            y -= g * c(step, 0.0);
            normalize(&mut y);
        }
        laplacian_energy(cfg, &HermitianMatrix::from_hermitian_part(&y)).unwrap()
    }

    #[test]
    fn first_eigenvalue_is_constrained_minimum() {
        for (seed, n) in [(11u64, 2usize), (12, 3), (13, 4)] {
            let cfg = random_config(seed, n, 3);
            let a = laplacian_spectrum(&cfg).unwrap();
            let m = constrained_minimum(&cfg, seed);
            assert!(
                (m - a.eigenvalues[1]).abs() < 1e-6,
                "N={n}: {m} vs {}",
                a.eigenvalues[1]
            );
        }
    }

    #[test]
    fn classification() {
        let pts = vec![vec![0.0, 1.0], vec![1.0, 2.0]];
        let c0 = classify_configuration(&commuting_config(&pts).unwrap()).unwrap();
        assert_eq!((c0.class, c0.ratio), (ConfigurationClass::Classical, 0.0));

        // independent centered GUE matrices are asymptotically free with
        // tau(abab) = 0, so ||[A,B]||^2 / ||AB||^2 -> 2
        let g = classify_configuration(&random_config(21, 32, 2)).unwrap();
        assert_eq!(g.class, ConfigurationClass::DeepQuantum);
        assert!((g.ratio - 2f64.sqrt()).abs() < 0.1, "r = {}", g.ratio);

        let r: Vec<f64> = [1, 3, 15]
            .iter()
            .map(|&t| classify_configuration(&spin(t)).unwrap().ratio)
            .collect();
        assert!(r[0] > r[1] && r[1] > r[2], "{r:?}");
        assert_eq!(
            classify_configuration(&spin(15)).unwrap().class,
            ConfigurationClass::AlmostCommutative
        );
        let one =
            MatrixConfiguration::new(vec![angular_momentum(SpinLabel::new(1).unwrap())[0].clone()])
                .unwrap();
        assert!(classify_configuration(&one).is_err());
    }

    #[test]
    fn entropy_examples() {
        let n = 4;
        let mixed = HermitianMatrix::identity(n).scale(1.0 / (n as f64).sqrt());
        assert!((observable_entropy(&mixed).unwrap() - (n as f64).ln()).abs() < 1e-12);
        let pure = HermitianMatrix::from_real_diagonal(&[0.0, 1.0, 0.0]);
        assert!(observable_entropy(&pure).unwrap().abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let two = HermitianMatrix::from_real_diagonal(&[s, s, 0.0]);
        assert!((observable_entropy(&two).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(observable_entropy(&HermitianMatrix::identity(2)).is_err());
    }

    #[test]
    fn nonlocal_correlation_examples() {
        let state = |v: Vec<C64>| QuasiCoherentState {
            vector: CVector::from_vec(v),
            energy: 0.0,
            point: vec![],
            gap: 1.0,
            degenerate: false,
        };
        let x = state(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let y = state(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let px = HermitianMatrix::outer(&x.vector);
        assert!((nonlocal_correlation(std::slice::from_ref(&x), &px).unwrap() - 1.0).abs() < 1e-15);
        let both = [x.clone(), y.clone()];
        let purity = nonlocal_correlation(&both, &HermitianMatrix::identity(2)).unwrap();
        assert!((purity - 0.5).abs() < 1e-15);
        let flip = HermitianMatrix::from_hermitian_part(
            &(&x.vector * y.vector.adjoint() + &y.vector * x.vector.adjoint()),
        );
        assert!((nonlocal_correlation(&both, &flip).unwrap() - 0.5).abs() < 1e-15);
        assert!(nonlocal_correlation(&[], &flip).is_err());
    }
}
