//! Displacement Hamiltonians, quasi-coherent states and the point clouds they induce.
//!
//! For a configuration `{X_a}` and a feature-space point `x`,
//! `H(x) = 1/2 sum_a (X_a - x_a)^2`. Its ground state `|x>` is the
//! quasi-coherent state, and `<x|X_a|x>` is the image of `x` on the learned
//! geometry. The ground energy splits as `2 lambda = sigma^2 + d^2` into
//! quantum variance and squared displacement.

use rayon::prelude::*;

use crate::configuration::MatrixConfiguration;
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, CMatrix, CVector, HermitianMatrix};
use crate::seeded_rng;

/// Relative gap below which a ground state counts as degenerate:
/// `gap <= DEGENERACY_REL * max(1, lambda_max)`.
pub const DEGENERACY_REL: f64 = 1e-8;

pub fn degeneracy_threshold(eigenvalues: &[f64]) -> f64 {
    let top = eigenvalues.last().copied().unwrap_or(0.0);
    DEGENERACY_REL * top.max(1.0)
}

/// Full spectrum of `H(x)`.
#[derive(Clone, Debug)]
pub struct DisplacementSpectrum {
    pub point: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
    /// `lambda_1 - lambda_0`; infinite when `N = 1`.
    pub gap: f64,
    pub degenerate: bool,
}

impl DisplacementSpectrum {
    pub fn ground_state(&self) -> QuasiCoherentState {
        QuasiCoherentState {
            vector: self.eigenvectors.column(0).into_owned(),
            energy: self.eigenvalues[0],
            point: self.point.clone(),
            gap: self.gap,
            degenerate: self.degenerate,
        }
    }
}

/// Normalized ground state of `H(x)`.
#[derive(Clone, Debug)]
pub struct QuasiCoherentState {
    pub vector: CVector,
    /// `lambda(x)`
    pub energy: f64,
    pub point: Vec<f64>,
    pub gap: f64,
    pub degenerate: bool,
}

/// A point of the QCML cloud together with its error budget.
#[derive(Clone, Debug, PartialEq)]
pub struct CloudPoint {
    pub source: Vec<f64>,
    /// `<x|X_a|x>`
    pub image: Vec<f64>,
    pub displacement_sq: f64,
    pub variance: f64,
    pub energy: f64,
}

/// Cloud points plus the indices of inputs that were skipped as degenerate.
#[derive(Clone, Debug, Default)]
pub struct Cloud {
    pub points: Vec<CloudPoint>,
    /// Input index of each entry of `points`.
    pub indices: Vec<usize>,
    pub degenerate: Vec<usize>,
}

impl Cloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A configuration with `sum_a X_a^2` cached, for repeated evaluation of `H(x)`.
#[derive(Clone, Debug)]
pub struct DisplacementModel<'a> {
    cfg: &'a MatrixConfiguration,
    sum_sq: CMatrix,
}

impl<'a> DisplacementModel<'a> {
    pub fn new(cfg: &'a MatrixConfiguration) -> Self {
        Self {
            cfg,
            sum_sq: cfg.sum_of_squares().into_matrix(),
        }
    }

    pub fn configuration(&self) -> &MatrixConfiguration {
        self.cfg
    }

    /// `sum_a X_a^2`
    pub fn sum_of_squares(&self) -> &CMatrix {
        &self.sum_sq
    }

    /// `1/2 sum_a X_a^2 - sum_a x_a X_a + |x|^2/2`.
    pub fn hamiltonian(&self, x: &[f64]) -> Result<HermitianMatrix> {
        self.cfg.check_point(x)?;
        let n = self.cfg.hilbert_dim();
        let mut h = self.sum_sq.scale(0.5);
        for (xa, &s) in self.cfg.observables().iter().zip(x) {
            if s != 0.0 {
                h.zip_apply(xa.matrix(), |hij, xij| *hij -= xij * s);
            }
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        for i in 0..n {
            h[(i, i)].re += 0.5 * r2;
        }
        Ok(HermitianMatrix::from_hermitian_part(&h))
    }

    pub fn spectrum(&self, x: &[f64]) -> Result<DisplacementSpectrum> {
        let h = self.hamiltonian(x)?;
        let e = hermitian_eig(&h);
        let gap = if e.dim() > 1 {
            e.eigenvalues[1] - e.eigenvalues[0]
        } else {
            f64::INFINITY
        };
        let degenerate = gap <= degeneracy_threshold(&e.eigenvalues);
        Ok(DisplacementSpectrum {
            point: x.to_vec(),
            eigenvalues: e.eigenvalues,
            eigenvectors: e.eigenvectors,
            gap,
            degenerate,
        })
    }

    pub fn state(&self, x: &[f64]) -> Result<QuasiCoherentState> {
        Ok(self.spectrum(x)?.ground_state())
    }

    pub fn cloud_point(&self, x: &[f64]) -> Result<CloudPoint> {
        let state = self.state(x)?;
        if state.degenerate {
            return Err(Error::DegenerateState { gap: state.gap });
        }
        Ok(self.cloud_point_from_state(&state))
    }

    /// Expectation values for a state that is already known; no degeneracy check.
    pub fn cloud_point_from_state(&self, state: &QuasiCoherentState) -> CloudPoint {
        let psi = &state.vector;
        let mut image = Vec::with_capacity(self.cfg.feature_dim());
        let mut displacement_sq = 0.0;
        let mut variance = 0.0;
        for (xa, &s) in self.cfg.observables().iter().zip(&state.point) {
            let u = xa.matrix() * psi;
            let mean = psi.dotc(&u).re;
            let second = u.norm_squared();
            image.push(mean);
            displacement_sq += (mean - s) * (mean - s);
            variance += second - mean * mean;
        }
        CloudPoint {
            source: state.point.clone(),
            image,
            displacement_sq,
            variance,
            energy: state.energy,
        }
    }

    fn cloud_of(&self, points: Vec<Vec<f64>>) -> Result<Cloud> {
        for p in &points {
            self.cfg.check_point(p)?;
        }
        let results: Vec<Result<CloudPoint>> =
            points.par_iter().map(|p| self.cloud_point(p)).collect();
        let mut cloud = Cloud::default();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(cp) => {
                    cloud.points.push(cp);
                    cloud.indices.push(i);
                }
                Err(Error::DegenerateState { gap }) => {
                    log::debug!("point {i} skipped: degenerate ground state (gap {gap:e})");
                    cloud.degenerate.push(i);
                }
                Err(e) => return Err(e),
            }
        }
        if !cloud.degenerate.is_empty() {
            log::info!(
                "{} degenerate points excluded from cloud",
                cloud.degenerate.len()
            );
        }
        Ok(cloud)
    }
}

pub fn displacement_hamiltonian(cfg: &MatrixConfiguration, x: &[f64]) -> Result<HermitianMatrix> {
    cfg.check_point(x)?;
    let n = cfg.hilbert_dim();
    let mut h = CMatrix::zeros(n, n);
    for (xa, &s) in cfg.observables().iter().zip(x) {
        let shifted = xa.shifted(-s);
        h += shifted.matrix() * shifted.matrix();
    }
    Ok(HermitianMatrix::from_hermitian_part(&h.scale(0.5)))
}

pub fn displacement_spectrum(cfg: &MatrixConfiguration, x: &[f64]) -> Result<DisplacementSpectrum> {
    DisplacementModel::new(cfg).spectrum(x)
}

/// Ground state of `H(x)`. Degeneracy is reported through the flag, not as an error.
pub fn quasi_coherent_state(cfg: &MatrixConfiguration, x: &[f64]) -> Result<QuasiCoherentState> {
    DisplacementModel::new(cfg).state(x)
}

pub fn cloud_point(cfg: &MatrixConfiguration, x: &[f64]) -> Result<CloudPoint> {
    DisplacementModel::new(cfg).cloud_point(x)
}

/// Maps every data row through [`cloud_point`]. Degenerate rows are listed in
/// [`Cloud::degenerate`].
pub fn qcml_cloud(cfg: &MatrixConfiguration, data: &Dataset) -> Result<Cloud> {
    if data.n_features() != cfg.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.feature_dim(),
            found: data.n_features(),
        });
    }
    DisplacementModel::new(cfg).cloud_of(data.rows().map(|r| r.to_vec()).collect())
}

/// Axis-aligned box in feature space.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Validation(
                "region lower bound exceeds upper bound".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        Self {
            lower: vec![-half_width; dim],
            upper: vec![half_width; dim],
        }
    }

    /// Bounding box of the data with each side widened by `inflation` (0.2 = 20%).
    /// Constant features get a unit-width box.
    pub fn around(data: &Dataset, inflation: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Validation("cannot bound an empty dataset".into()));
        }
        let d = data.n_features();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for row in data.rows() {
            for (k, &v) in row.iter().enumerate() {
                lower[k] = lower[k].min(v);
                upper[k] = upper[k].max(v);
            }
        }
        for k in 0..d {
            let width = upper[k] - lower[k];
            let pad = if width > 0.0 {
                0.5 * inflation * width
            } else {
                0.5
            };
            lower[k] -= pad;
            upper[k] += pad;
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| if u > l { rng.random_range(l..u) } else { l })
            .collect()
    }
}

/// Images of uniform random samples from `region`: the learned geometry seen
/// independently of any data.
pub fn qg_point_cloud(
    cfg: &MatrixConfiguration,
    region: &Region,
    n_samples: usize,
    seed: u64,
) -> Result<Cloud> {
    cfg.check_point(&region.lower)?;
    let mut rng = seeded_rng(seed);
    let points: Vec<Vec<f64>> = (0..n_samples).map(|_| region.sample(&mut rng)).collect();
    DisplacementModel::new(cfg).cloud_of(points)
}

/// `||1||_2^2 = Tr(1) = N`.
///
/// Semiclassically the trace of the identity integrates the symplectic volume
/// of the quantum space, so `N` also counts its quantum cells. The region and
/// sample count only need to be valid; the value does not depend on them.
pub fn hilbert_dim_estimate(
    cfg: &MatrixConfiguration,
    region: &Region,
    n_samples: usize,
) -> Result<f64> {
    cfg.check_point(&region.lower)?;
    if n_samples == 0 {
        return Err(Error::Validation("n_samples must be >= 1".into()));
    }
    Ok(HermitianMatrix::identity(cfg.hilbert_dim())
        .norm()
        .powi(2)
        .round())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, pauli, random_hermitian};
    use crate::reference::{commuting_config, fuzzy_sphere, SpinLabel};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn spin_half() -> MatrixConfiguration {
        MatrixConfiguration::new(pauli().iter().map(|s| s.scale(0.5)).collect()).unwrap()
    }

    #[test]
    fn scalar_hamiltonian() {
        let cfg =
            MatrixConfiguration::new(vec![HermitianMatrix::from_real_diagonal(&[0.0])]).unwrap();
        let h = displacement_hamiltonian(&cfg, &[2.0]).unwrap();
        assert_eq!(h.matrix()[(0, 0)], c(2.0, 0.0));
    }

    #[test]
    fn zero_shift_hamiltonian_is_half_sum_of_squares() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let cfg = MatrixConfiguration::new((0..3).map(|_| random_hermitian(4, &mut rng)).collect())
            .unwrap();
        let h = displacement_hamiltonian(&cfg, &[0.0; 3]).unwrap();
        let expected = cfg.sum_of_squares().scale(0.5);
        assert!((h.matrix() - expected.matrix()).norm() < 1e-13);
    }

    #[test]
    fn spin_half_north_pole_hamiltonian() {
        let cfg = spin_half();
        let h = displacement_hamiltonian(&cfg, &[0.0, 0.0, 1.0]).unwrap();
        let expected = &HermitianMatrix::identity(2).scale(7.0 / 8.0) - &pauli()[2].scale(0.5);
        assert!((h.matrix() - expected.matrix()).norm() < 1e-15);
        let e = h.eig();
        assert!((e.eigenvalues[0] - 3.0 / 8.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 11.0 / 8.0).abs() < 1e-14);
        let cached = DisplacementModel::new(&cfg)
            .hamiltonian(&[0.0, 0.0, 1.0])
            .unwrap();
        assert!((cached.matrix() - expected.matrix()).norm() < 1e-14);
    }

    #[test]
    fn spin_half_state_and_cloud_point() {
        let cfg = spin_half();
        let s = quasi_coherent_state(&cfg, &[0.0, 0.0, 1.0]).unwrap();
        assert!(!s.degenerate);
        assert!((s.energy - 0.375).abs() < 1e-14);
        assert!((s.vector[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(s.vector[1].norm() < 1e-14);

        let cp = cloud_point(&cfg, &[0.0, 0.0, 1.0]).unwrap();
        let expect = [0.0, 0.0, 0.5];
        for (a, b) in cp.image.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((cp.displacement_sq - 0.25).abs() < 1e-14);
        assert!((cp.variance - 0.5).abs() < 1e-14);
        assert!((cp.energy - 0.375).abs() < 1e-14);
    }

    #[test]
    fn spin_half_origin_is_degenerate() {
        let cfg = spin_half();
        let s = quasi_coherent_state(&cfg, &[0.0; 3]).unwrap();
        assert!(s.degenerate);
        assert!(matches!(
            cloud_point(&cfg, &[0.0; 3]),
            Err(Error::DegenerateState { .. })
        ));
    }

    #[test]
    fn spin_half_projects_radially() {
        let cfg = spin_half();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let cp = cloud_point(&cfg, &x).unwrap();
            for k in 0..3 {
                assert!((cp.image[k] - 0.5 * x[k] / r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn commuting_nearest_point() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]];
        let cfg = commuting_config(&pts).unwrap();
        let s = quasi_coherent_state(&cfg, &[0.9, 0.2]).unwrap();
        assert!((s.energy - 0.5 * (0.01 + 0.04)).abs() < 1e-12);
        assert!((s.vector[1].norm() - 1.0).abs() < 1e-12);
        let at = cloud_point(&cfg, &[0.0, 2.0]).unwrap();
        assert_eq!(at.image, vec![0.0, 2.0]);
        assert!(
            at.displacement_sq.abs() < 1e-15
                && at.variance.abs() < 1e-15
                && at.energy.abs() < 1e-15
        );
    }

    #[test]
    fn qg_cloud_of_spin_half_lies_on_half_sphere() {
        let cfg = spin_half();
        let cloud = qg_point_cloud(&cfg, &Region::cube(3, 1.0), 1000, 7).unwrap();
        assert_eq!(cloud.len() + cloud.degenerate.len(), 1000);
        for p in &cloud.points {
            let r = p.image.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((r - 0.5).abs() < 1e-8);
        }
        assert!(qg_point_cloud(&cfg, &Region::cube(3, 1.0), 0, 7)
            .unwrap()
            .is_empty());
        let again = qg_point_cloud(&cfg, &Region::cube(3, 1.0), 1000, 7).unwrap();
        assert_eq!(again.points, cloud.points);
    }

    #[test]
    fn qg_cloud_of_fuzzy_sphere_n4() {
        // alpha = 1/(j + w) with j = 3/2, w = 0.1; coherent states sit at radius alpha * j
        let alpha = 1.0 / 1.6;
        let cfg = fuzzy_sphere(SpinLabel::new(3).unwrap(), alpha).unwrap();
        let cloud = qg_point_cloud(&cfg, &Region::cube(3, 1.0), 500, 3).unwrap();
        for p in &cloud.points {
            let r = p.image.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((r - alpha * 1.5).abs() < 0.02);
        }
    }

    #[test]
    fn cloud_edge_cases() {
        let cfg = spin_half();
        assert!(Dataset::from_rows(Vec::new(), 3).is_err());
        let one = Dataset::from_rows(vec![vec![0.0, 1.0, 0.0]], 3).unwrap();
        assert_eq!(qcml_cloud(&cfg, &one).unwrap().len(), 1);
        let both = Dataset::from_rows(vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]], 3).unwrap();
        let cloud = qcml_cloud(&cfg, &both).unwrap();
        assert_eq!(cloud.degenerate, vec![0]);
        assert_eq!(cloud.indices, vec![1]);
        let wrong = Dataset::from_rows(vec![vec![1.0, 0.0]], 2).unwrap();
        assert!(qcml_cloud(&cfg, &wrong).is_err());
        assert!(cloud_point(&cfg, &[1.0]).is_err());
    }

    #[test]
    fn hilbert_dim_is_trace_of_identity() {
        for two_j in [1, 3, 7] {
            let cfg = fuzzy_sphere(SpinLabel::new(two_j).unwrap(), 1.0).unwrap();
            let n = hilbert_dim_estimate(&cfg, &Region::cube(3, 1.0), 10).unwrap();
            assert_eq!(n, (two_j + 1) as f64);
        }
    }

    fn random_config(seed: u64, n: usize, d: usize) -> MatrixConfiguration {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        MatrixConfiguration::new((0..d).map(|_| random_hermitian(n, &mut rng)).collect()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn energy_identity_and_positivity(seed in 0u64..10_000, n in 2usize..7, d in 1usize..5,
                                          x in prop::collection::vec(-2.0f64..2.0, 4)) {
            let cfg = random_config(seed, n, d);
            let x = &x[..d];
            let spec = displacement_spectrum(&cfg, x).unwrap();
            prop_assert!(spec.eigenvalues[0] >= -1e-12);
            if !spec.degenerate {
                let cp = cloud_point(&cfg, x).unwrap();
                let scale = spec.eigenvalues.last().unwrap().max(1.0);
                prop_assert!((2.0 * cp.energy - cp.variance - cp.displacement_sq).abs() <= 1e-8 * scale);
            }
        }

        #[test]
        fn translation_covariance(seed in 0u64..10_000, shift in prop::collection::vec(-3.0f64..3.0, 3),
                                  x in prop::collection::vec(-2.0f64..2.0, 3)) {
            let cfg = random_config(seed, 4, 3);
            let moved = cfg.translated(&shift).unwrap();
            let y: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let a = displacement_spectrum(&cfg, &x).unwrap();
            let b = displacement_spectrum(&moved, &y).unwrap();
            prop_assert!((a.eigenvalues[0] - b.eigenvalues[0]).abs() < 1e-10);
            prop_assert!((a.gap - b.gap).abs() < 1e-10);
            if !a.degenerate {
                let ca = cloud_point(&cfg, &x).unwrap();
                let cb = cloud_point(&moved, &y).unwrap();
                prop_assert!((ca.displacement_sq - cb.displacement_sq).abs() < 1e-10);
                prop_assert!((ca.variance - cb.variance).abs() < 1e-10);
            }
        }

        #[test]
        fn commuting_energy_is_half_nearest_distance(seed in 0u64..10_000, n in 1usize..8, d in 1usize..4) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let cfg = commuting_config(&pts).unwrap();
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            let nearest = pts.iter().map(|p| p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let s = quasi_coherent_state(&cfg, &q).unwrap();
            prop_assert!((s.energy - 0.5 * nearest).abs() < 1e-10);
        }
    }
}
