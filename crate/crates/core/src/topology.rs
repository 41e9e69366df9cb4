//! Quantum geometric tensor, metric-spectrum dimension, quantum distance,
//! degeneracy points of `H(x)` and their Chern numbers.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherent::{degeneracy_threshold, DisplacementModel, QuasiCoherentState};
use crate::configuration::MatrixConfiguration;
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector, C64};
use crate::seeded_rng;

/// `q_{mu nu}` at a point, with `g = 2 Re q` and `omega = 2 Im q`.
#[derive(Clone, Debug)]
pub struct QuantumGeometricTensor {
    pub point: Vec<f64>,
    pub q: CMatrix,
    pub g: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
}

/// `q_{mu nu} = sum_{k>0} <0|X_mu|k><k|X_nu|0> / (lambda_k - lambda_0)^2`,
/// the first-order perturbation sum with `d_mu H = x_mu - X_mu`.
pub fn qgt(cfg: &MatrixConfiguration, x: &[f64]) -> Result<QuantumGeometricTensor> {
    qgt_with(&DisplacementModel::new(cfg), x)
}

fn qgt_with(model: &DisplacementModel<'_>, x: &[f64]) -> Result<QuantumGeometricTensor> {
    let spec = model.spectrum(x)?;
    if spec.degenerate {
        return Err(Error::DegenerateState { gap: spec.gap });
    }
    Ok(qgt_from_eigensystem(
        model.configuration(),
        x,
        &spec.eigenvalues,
        &spec.eigenvectors,
    ))
}

fn qgt_from_eigensystem(
    cfg: &MatrixConfiguration,
    x: &[f64],
    eigenvalues: &[f64],
    eigenvectors: &CMatrix,
) -> QuantumGeometricTensor {
    let n = eigenvalues.len();
    let d = cfg.feature_dim();
    let psi = eigenvectors.column(0);
    // a[(k-1, mu)] = <k|X_mu|0> / (lambda_k - lambda_0)
    let mut a = CMatrix::zeros(n.saturating_sub(1), d);
    for (mu, xm) in cfg.observables().iter().enumerate() {
        let u = xm.matrix() * psi;
        for k in 1..n {
            let denom = eigenvalues[k] - eigenvalues[0];
            a[(k - 1, mu)] = eigenvectors.column(k).dotc(&u) / c(denom, 0.0);
        }
    }
    let q = a.adjoint() * &a;
    let g = (0..d)
        .map(|m| (0..d).map(|v| 2.0 * q[(m, v)].re).collect())
        .collect();
    let omega = (0..d)
        .map(|m| (0..d).map(|v| 2.0 * q[(m, v)].im).collect())
        .collect();
    QuantumGeometricTensor {
        point: x.to_vec(),
        q,
        g,
        omega,
    }
}

/// Per-point quantum-metric spectra and the dimension estimate derived from them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricDimension {
    /// Eigenvalues of `g` at each evaluated point, descending.
    pub spectra: Vec<Vec<f64>>,
    /// Per-point dimension: number of eigenvalues before the first large ratio gap.
    pub dimensions: Vec<usize>,
    /// Most frequent per-point dimension (smallest on ties).
    pub dimension: usize,
    /// Share of evaluated points whose dimension equals `dimension`.
    pub agreement: f64,
    /// Input indices skipped because the ground state was degenerate.
    pub degenerate: Vec<usize>,
}

/// Default ratio `e_i / e_{i+1}` that counts as a spectral gap.
pub const DEFAULT_GAP_RATIO: f64 = 10.0;

/// Number of leading eigenvalues before the first ratio exceeding `threshold`.
/// An all-zero spectrum has dimension 0; a spectrum without a gap has full dimension.
pub fn gap_dimension(descending: &[f64], threshold: f64) -> usize {
    let top = descending.first().copied().unwrap_or(0.0);
    if top <= 1e-12 {
        return 0;
    }
    for i in 0..descending.len() - 1 {
        let next = descending[i + 1].max(0.0);
        if descending[i] > threshold * next {
            return i + 1;
        }
    }
    descending.len()
}

pub fn metric_dimension(
    cfg: &MatrixConfiguration,
    points: &[Vec<f64>],
    gap_ratio_threshold: f64,
) -> Result<MetricDimension> {
    if points.is_empty() {
        return Err(Error::Validation(
            "metric dimension needs at least one point".into(),
        ));
    }
    if !(gap_ratio_threshold > 1.0) {
        return Err(Error::Validation(format!(
            "gap ratio threshold must exceed 1, got {gap_ratio_threshold}"
        )));
    }
    for p in points {
        cfg.check_point(p)?;
    }
    let model = DisplacementModel::new(cfg);
    let results: Vec<Option<Vec<f64>>> = points
        .par_iter()
        .map(|p| match qgt_with(&model, p) {
            Ok(t) => {
                let d = t.g.len();
                let g = nalgebra::DMatrix::from_fn(d, d, |i, j| t.g[i][j]);
                let mut e: Vec<f64> = g.symmetric_eigen().eigenvalues.iter().copied().collect();
                e.sort_by(|a, b| b.total_cmp(a));
                Ok(Some(e))
            }
            Err(Error::DegenerateState { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let mut spectra = Vec::new();
    let mut degenerate = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Some(e) => spectra.push(e),
            None => degenerate.push(i),
        }
    }
    if spectra.is_empty() {
        return Err(Error::DegenerateState { gap: 0.0 });
    }
    let dimensions: Vec<usize> = spectra
        .iter()
        .map(|e| gap_dimension(e, gap_ratio_threshold))
        .collect();
    let mut counts = vec![0usize; cfg.feature_dim() + 1];
    for &d in &dimensions {
        counts[d] += 1;
    }
    let (dimension, &best) =
        counts
            .iter()
            .enumerate()
            .fold((0, &0), |acc, x| if x.1 > acc.1 { x } else { acc });
    Ok(MetricDimension {
        agreement: best as f64 / dimensions.len() as f64,
        spectra,
        dimensions,
        dimension,
        degenerate,
    })
}

/// `(D, phi)` with `<s1|s2> = exp(i phi - D^2)`. Orthogonal states give `D = inf`.
pub fn quantum_distance(s1: &QuasiCoherentState, s2: &QuasiCoherentState) -> Result<(f64, f64)> {
    if s1.vector.len() != s2.vector.len() {
        return Err(Error::DimensionMismatch {
            expected: s1.vector.len(),
            found: s2.vector.len(),
        });
    }
    for s in [s1, s2] {
        if (s.vector.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(
                "quantum distance needs unit vectors".into(),
            ));
        }
    }
    let ov = s1.vector.dotc(&s2.vector);
    let modulus = ov.norm().min(1.0);
    if modulus == 0.0 {
        return Ok((f64::INFINITY, 0.0));
    }
    let mut phase = ov.arg();
    if phase <= -PI {
        phase = PI;
    }
    Ok(((-modulus.ln()).max(0.0).sqrt(), phase))
}

/// A 3-dimensional affine slice `origin + sum_i u_i e_i` of feature space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub origin: Vec<f64>,
    pub frame: [Vec<f64>; 3],
}

impl Slice {
    pub fn new(origin: Vec<f64>, frame: [Vec<f64>; 3]) -> Result<Self> {
        let d = origin.len();
        for (i, e) in frame.iter().enumerate() {
            if e.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: e.len(),
                });
            }
            for (j, f) in frame.iter().enumerate() {
                let dot: f64 = e.iter().zip(f).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-10 {
                    return Err(Error::Validation("slice frame must be orthonormal".into()));
                }
            }
        }
        Ok(Self { origin, frame })
    }

    /// The first three coordinate axes through the origin.
    pub fn axes(d: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::Validation(format!(
                "a 3-dimensional slice needs D >= 3, got {d}"
            )));
        }
        let e = |k: usize| (0..d).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
        Ok(Self {
            origin: vec![0.0; d],
            frame: [e(0), e(1), e(2)],
        })
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn embed(&self, u: [f64; 3]) -> Vec<f64> {
        let mut x = self.origin.clone();
        for (ui, e) in u.iter().zip(&self.frame) {
            for (xk, ek) in x.iter_mut().zip(e) {
                *xk += ui * ek;
            }
        }
        x
    }
}

/// Axis-aligned box in slice coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

impl SearchBox {
    pub fn new(lower: [f64; 3], upper: [f64; 3]) -> Result<Self> {
        if (0..3).any(|k| !(lower[k] < upper[k])) {
            return Err(Error::Validation(
                "search box needs lower < upper on every axis".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(center: [f64; 3], half_width: f64) -> Result<Self> {
        Self::new(
            center.map(|v| v - half_width),
            center.map(|v| v + half_width),
        )
    }

    /// Largest half-side; sets the acceptance and de-duplication scales.
    pub fn scale(&self) -> f64 {
        (0..3)
            .map(|k| 0.5 * (self.upper[k] - self.lower[k]))
            .fold(0.0, f64::max)
    }

    fn clamp(&self, u: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|k| u[k].clamp(self.lower[k], self.upper[k]))
    }

    fn contains(&self, u: [f64; 3]) -> bool {
        (0..3).all(|k| u[k] >= self.lower[k] && u[k] <= self.upper[k])
    }
}

/// A point where the two lowest eigenvalues of `H(x)` meet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyPoint {
    /// Slice coordinates.
    pub location: [f64; 3],
    /// Feature-space position.
    pub position: Vec<f64>,
    pub gap: f64,
    pub charge: Option<i64>,
}

/// Accepted gap, relative to the box scale.
pub const SEARCH_GAP_REL: f64 = 1e-3;
/// De-duplication radius, relative to the box scale.
pub const DEDUPE_REL: f64 = 1e-2;
/// Coarse seeding grid per axis.
const SEED_GRID: usize = 8;

fn gap_at(model: &DisplacementModel<'_>, slice: &Slice, u: [f64; 3]) -> Result<f64> {
    let spec = model.spectrum(&slice.embed(u))?;
    Ok(spec.gap)
}

/// Nelder-Mead on a function of three variables. Returns the best vertex and value.
fn nelder_mead<F>(
    f: &F,
    start: [f64; 3],
    step: f64,
    tol: f64,
    max_evals: usize,
) -> Result<([f64; 3], f64)>
where
    F: Fn([f64; 3]) -> Result<f64>,
{
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((start, f(start)?));
    for k in 0..3 {
        let mut v = start;
        v[k] += step;
        simplex.push((v, f(v)?));
    }
    let mut evals = 4;
    let lerp = |a: [f64; 3], b: [f64; 3], t: f64| [0, 1, 2].map(|k| a[k] + t * (b[k] - a[k]));
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = simplex[1..]
            .iter()
            .map(|(v, _)| {
                (0..3)
                    .map(|k| (v[k] - simplex[0].0[k]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if size < tol {
            break;
        }
        let centroid = [0, 1, 2].map(|k| simplex[..3].iter().map(|(v, _)| v[k]).sum::<f64>() / 3.0);
        let worst = simplex[3];
        let reflected = lerp(centroid, worst.0, -1.0);
        let fr = f(reflected)?;
        evals += 1;
        if fr < simplex[0].1 {
            let expanded = lerp(centroid, worst.0, -2.0);
            let fe = f(expanded)?;
            evals += 1;
            simplex[3] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[2].1 {
            simplex[3] = (reflected, fr);
        } else {
            let (target, ft) = if fr < worst.1 { (reflected, fr) } else { worst };
            let contracted = lerp(centroid, target, 0.5);
            let fc = f(contracted)?;
            evals += 1;
            if fc < ft {
                simplex[3] = (contracted, fc);
            } else {
                let best = simplex[0].0;
                for vertex in simplex.iter_mut().skip(1) {
                    let v = lerp(best, vertex.0, 0.5);
                    *vertex = (v, f(v)?);
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(simplex[0])
}

/// Multi-start search for degeneracy points inside `search_box`.
///
/// Seeds are the local minima of the gap on a coarse `8^3` grid plus
/// `n_starts` uniform random points. Each seed is refined by restarted
/// Nelder-Mead on `lambda_1 - lambda_0`; minima with gap at most
/// `1e-3 * scale` are kept and merged within `1e-2 * scale`, where `scale`
/// is the largest half-side of the box. Charges are left unset.
pub fn find_degeneracy_points(
    cfg: &MatrixConfiguration,
    slice: &Slice,
    search_box: &SearchBox,
    n_starts: usize,
    seed: u64,
) -> Result<Vec<DegeneracyPoint>> {
    if slice.dim() != cfg.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.feature_dim(),
            found: slice.dim(),
        });
    }
    if n_starts == 0 {
        return Err(Error::Validation("n_starts must be >= 1".into()));
    }
    if cfg.hilbert_dim() < 2 {
        return Ok(Vec::new());
    }
    let model = DisplacementModel::new(cfg);
    let scale = search_box.scale();
    let f = |u: [f64; 3]| gap_at(&model, slice, search_box.clamp(u));

    let cell = [0, 1, 2].map(|k| (search_box.upper[k] - search_box.lower[k]) / SEED_GRID as f64);
    let grid_point = |i: usize, j: usize, k: usize| {
        [
            search_box.lower[0] + (i as f64 + 0.5) * cell[0],
            search_box.lower[1] + (j as f64 + 0.5) * cell[1],
            search_box.lower[2] + (k as f64 + 0.5) * cell[2],
        ]
    };
    let idx: Vec<(usize, usize, usize)> = (0..SEED_GRID)
        .flat_map(|i| (0..SEED_GRID).flat_map(move |j| (0..SEED_GRID).map(move |k| (i, j, k))))
        .collect();
    let values: Vec<f64> = idx
        .par_iter()
        .map(|&(i, j, k)| f(grid_point(i, j, k)))
        .collect::<Result<_>>()?;
    let at = |i: usize, j: usize, k: usize| values[(i * SEED_GRID + j) * SEED_GRID + k];
    let mut seeds = Vec::new();
    for &(i, j, k) in &idx {
        let v = at(i, j, k);
        let mut is_min = true;
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                for dk in -1i64..=1 {
                    let (a, b, cc) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                    let inside = |t: i64| (0..SEED_GRID as i64).contains(&t);
                    if (di, dj, dk) != (0, 0, 0)
                        && inside(a)
                        && inside(b)
                        && inside(cc)
                        && at(a as usize, b as usize, cc as usize) < v
                    {
                        is_min = false;
                    }
                }
            }
        }
        if is_min {
            seeds.push(grid_point(i, j, k));
        }
    }
    let mut rng = seeded_rng(seed);
    for _ in 0..n_starts {
        seeds.push([0, 1, 2].map(|k| rng.random_range(search_box.lower[k]..=search_box.upper[k])));
    }

    let step = cell.iter().copied().fold(0.0, f64::max);
    let tol = 1e-10 * scale;
    let refined: Vec<([f64; 3], f64)> = seeds
        .par_iter()
        .map(|&s| {
            let mut best = nelder_mead(&f, s, step, tol, 4000)?;
            for r in 0..3 {
                let restart = step * 0.1f64.powi(r + 1);
                let next = nelder_mead(&f, best.0, restart, tol, 4000)?;
                if next.1 <= best.1 {
                    best = next;
                }
            }
            Ok((search_box.clamp(best.0), best.1))
        })
        .collect::<Result<_>>()?;

    let accept = SEARCH_GAP_REL * scale;
    let radius = DEDUPE_REL * scale;
    let mut hits: Vec<([f64; 3], f64)> = refined
        .into_iter()
        .filter(|(u, g)| *g <= accept && search_box.contains(*u))
        .collect();
    hits.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then(a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
    });
    let mut kept: Vec<([f64; 3], f64)> = Vec::new();
    for h in hits {
        if kept.iter().all(|k| distance(k.0, h.0) > radius) {
            kept.push(h);
        }
    }
    kept.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    Ok(kept
        .into_iter()
        .map(|(u, gap)| DegeneracyPoint {
            location: u,
            position: slice.embed(u),
            gap,
            charge: None,
        })
        .collect())
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Lattice sizes in polar and azimuthal direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereGrid {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for SphereGrid {
    fn default() -> Self {
        Self {
            n_theta: 24,
            n_phi: 24,
        }
    }
}

/// Largest allowed distance of the raw lattice flux from an integer.
pub const CHERN_RESIDUAL_TOL: f64 = 0.05;
/// Largest allowed single-plaquette phase. The lattice sum over a closed
/// surface is an integer by construction, so resolution is judged per plaquette.
pub const MAX_PLAQUETTE_PHASE: f64 = 0.5 * PI;

/// Raw Berry flux / 2 pi through a sphere, before rounding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChernMeasurement {
    pub charge: i64,
    pub raw: f64,
    pub min_gap: f64,
}

/// First Chern number of the ground-state bundle over the sphere of
/// `radius` around `center` (slice coordinates).
///
/// Grid: `theta_i = pi i / n_theta`, `phi_j = 2 pi j / n_phi`, one state per
/// pole. Each plaquette `(i,j) -> (i+1,j) -> (i+1,j+1) -> (i,j+1)` is
/// traversed counter-clockwise seen from outside and contributes `arg` of
/// its product of normalized overlaps. Fails with `GridTooCoarse` when the
/// flux is more than 0.05 from an integer or any plaquette phase exceeds `pi / 2`.
pub fn chern_measurement(
    cfg: &MatrixConfiguration,
    slice: &Slice,
    center: [f64; 3],
    radius: f64,
    grid: SphereGrid,
) -> Result<ChernMeasurement> {
    if slice.dim() != cfg.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.feature_dim(),
            found: slice.dim(),
        });
    }
    if !(radius > 0.0) {
        return Err(Error::Validation(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if grid.n_theta < 2 || grid.n_phi < 3 {
        return Err(Error::Validation(
            "sphere grid needs n_theta >= 2 and n_phi >= 3".into(),
        ));
    }
    let model = DisplacementModel::new(cfg);
    let (nt, np) = (grid.n_theta, grid.n_phi);
    // ring 0 and ring nt are the poles
    let sites: Vec<(usize, usize)> = std::iter::once((0, 0))
        .chain((1..nt).flat_map(|i| (0..np).map(move |j| (i, j))))
        .chain(std::iter::once((nt, 0)))
        .collect();
    let states: Vec<(CVector, f64, f64)> = sites
        .par_iter()
        .map(|&(i, j)| {
            let theta = PI * i as f64 / nt as f64;
            let phi = 2.0 * PI * j as f64 / np as f64;
            let u = [
                center[0] + radius * theta.sin() * phi.cos(),
                center[1] + radius * theta.sin() * phi.sin(),
                center[2] + radius * theta.cos(),
            ];
            let spec = model.spectrum(&slice.embed(u))?;
            let thr = degeneracy_threshold(&spec.eigenvalues);
            Ok((spec.eigenvectors.column(0).into_owned(), spec.gap, thr))
        })
        .collect::<Result<_>>()?;
    let min_gap = states.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    if states.iter().any(|s| s.1 <= s.2) {
        return Err(Error::DegenerateOnSphere { min_gap });
    }
    let state = |i: usize, j: usize| -> &CVector {
        if i == 0 {
            &states[0].0
        } else if i == nt {
            &states[states.len() - 1].0
        } else {
            &states[1 + (i - 1) * np + (j % np)].0
        }
    };
    let link = |a: &CVector, b: &CVector| -> C64 {
        let z = a.dotc(b);
        let m = z.norm();
        if m > 0.0 {
            z / m
        } else {
            c(1.0, 0.0)
        }
    };
    let mut flux = 0.0;
    let mut max_plaquette: f64 = 0.0;
    for i in 0..nt {
        for j in 0..np {
            let p = [
                state(i, j),
                state(i + 1, j),
                state(i + 1, j + 1),
                state(i, j + 1),
            ];
            let prod = link(p[0], p[1]) * link(p[1], p[2]) * link(p[2], p[3]) * link(p[3], p[0]);
            let f = prod.arg();
            max_plaquette = max_plaquette.max(f.abs());
            flux += f;
        }
    }
    let raw = flux / (2.0 * PI);
    let charge = raw.round();
    let residual = (raw - charge).abs();
    if residual > CHERN_RESIDUAL_TOL || max_plaquette > MAX_PLAQUETTE_PHASE {
        return Err(Error::GridTooCoarse {
            raw,
            residual,
            max_plaquette,
        });
    }
    Ok(ChernMeasurement {
        charge: charge as i64,
        raw,
        min_gap,
    })
}

pub fn chern_number(
    cfg: &MatrixConfiguration,
    slice: &Slice,
    center: [f64; 3],
    radius: f64,
    grid: SphereGrid,
) -> Result<i64> {
    Ok(chern_measurement(cfg, slice, center, radius, grid)?.charge)
}

/// Sets each point's charge from a sphere of radius `0.45 *` nearest-neighbour
/// distance (or `fallback_radius` for an isolated point). The grid is doubled
/// up to twice when too coarse; charges that still fail stay unset.
pub fn assign_charges(
    cfg: &MatrixConfiguration,
    slice: &Slice,
    points: &mut [DegeneracyPoint],
    grid: SphereGrid,
    fallback_radius: f64,
) -> Result<()> {
    let locs: Vec<[f64; 3]> = points.iter().map(|p| p.location).collect();
    for (i, p) in points.iter_mut().enumerate() {
        let nearest = locs
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, l)| distance(*l, p.location))
            .fold(f64::INFINITY, f64::min);
        let radius = if nearest.is_finite() {
            0.45 * nearest
        } else {
            fallback_radius
        };
        let mut g = grid;
        p.charge = None;
        for _ in 0..3 {
            match chern_measurement(cfg, slice, p.location, radius, g) {
                Ok(m) => {
                    p.charge = Some(m.charge);
                    break;
                }
                Err(Error::GridTooCoarse { .. }) => {
                    g = SphereGrid {
                        n_theta: 2 * g.n_theta,
                        n_phi: 2 * g.n_phi,
                    };
                }
                Err(Error::DegenerateOnSphere { min_gap }) => {
                    log::warn!(
                        "charge of point {i} unset: sphere touches a degeneracy (gap {min_gap:e})"
                    );
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent::quasi_coherent_state;
    use crate::linalg::random_hermitian;
    use crate::reference::{commuting_config, fuzzy_sphere, SpinLabel};

    fn spin(two_j: u32) -> MatrixConfiguration {
        fuzzy_sphere(SpinLabel::new(two_j).unwrap(), 1.0).unwrap()
    }

    fn random_config(seed: u64, n: usize, d: usize) -> MatrixConfiguration {
        let mut rng = seeded_rng(seed);
        MatrixConfiguration::new((0..d).map(|_| random_hermitian(n, &mut rng)).collect()).unwrap()
    }

    #[test]
    fn spin_half_tensor_at_north_pole() {
        let t = qgt(&spin(1), &[0.0, 0.0, 1.0]).unwrap();
        let want_g = [[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((t.g[i][j] - want_g[i][j]).abs() < 1e-12);
            }
        }
        assert!((t.omega[0][1].abs() - 0.5).abs() < 1e-12);
        assert!((t.omega[0][1] + t.omega[1][0]).abs() < 1e-12);
        assert!(t.omega[0][2].abs() < 1e-12 && t.omega[1][2].abs() < 1e-12);
    }

    #[test]
    fn commuting_config_has_flat_geometry() {
        let cfg = commuting_config(&[
            vec![0.0, 0.0, 0.0],
            vec![2.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
        ])
        .unwrap();
        let t = qgt(&cfg, &[0.3, 0.2, 0.1]).unwrap();
        assert!(t.q.norm() < 1e-14);
        let md = metric_dimension(
            &cfg,
            &[vec![0.3, 0.2, 0.1], vec![1.6, 0.1, 0.0]],
            DEFAULT_GAP_RATIO,
        )
        .unwrap();
        assert_eq!(md.dimension, 0);
    }

    /// Projected overlap of phase-aligned central differences of the ground state.
    fn finite_difference_qgt(cfg: &MatrixConfiguration, x: &[f64], h: f64) -> CMatrix {
        let psi = quasi_coherent_state(cfg, x).unwrap().vector;
        let aligned = |y: &[f64]| {
            let v = quasi_coherent_state(cfg, y).unwrap().vector;
            let ov = psi.dotc(&v);
            v * (ov.conj() / ov.norm())
        };
        let d = x.len();
        let derivs: Vec<CVector> = (0..d)
            .map(|mu| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[mu] += h;
                m[mu] -= h;
                let dv = (aligned(&p) - aligned(&m)) / c(2.0 * h, 0.0);
                &dv - &psi * psi.dotc(&dv)
            })
            .collect();
        CMatrix::from_fn(d, d, |m, v| derivs[m].dotc(&derivs[v]))
    }

    #[test]
    fn perturbation_sum_matches_finite_differences() {
        for seed in 0..5 {
            let cfg = random_config(seed, 4, 3);
            let x = [0.3, -0.2, 0.5];
            let t = qgt(&cfg, &x).unwrap();
            let fd = finite_difference_qgt(&cfg, &x, 1e-4);
            let err = (&t.q - &fd).norm();
            assert!(err < 1e-5 * t.q.norm().max(1.0), "seed {seed}: {err:e}");
        }
    }

    #[test]
    fn tensor_is_gauge_invariant() {
        let cfg = random_config(11, 5, 3);
        let x = [0.1, 0.2, -0.3];
        let spec = DisplacementModel::new(&cfg).spectrum(&x).unwrap();
        let base = qgt_from_eigensystem(&cfg, &x, &spec.eigenvalues, &spec.eigenvectors);
        let mut rotated = spec.eigenvectors.clone();
        for k in 0..rotated.ncols() {
            let phase = C64::from_polar(1.0, 0.7 * k as f64 + 0.3);
            let col = rotated.column(k) * phase;
            rotated.set_column(k, &col);
        }
        let other = qgt_from_eigensystem(&cfg, &x, &spec.eigenvalues, &rotated);
        assert!((&base.q - &other.q).norm() < 1e-12);
    }

    #[test]
    fn tensor_is_hermitian_psd() {
        let cfg = random_config(3, 6, 4);
        let t = qgt(&cfg, &[0.1, 0.0, 0.2, -0.1]).unwrap();
        assert!((&t.q - t.q.adjoint()).norm() < 1e-12);
        let e = nalgebra::DMatrix::from_fn(4, 4, |i, j| t.g[i][j])
            .symmetric_eigen()
            .eigenvalues;
        assert!(e.iter().all(|&v| v > -1e-8));
    }

    #[test]
    fn spin_half_metric_dimension_is_two() {
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|k| {
                let th = 0.3 + 0.4 * k as f64;
                let ph = 1.1 * k as f64;
                vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
            })
            .collect();
        let md = metric_dimension(&spin(1), &pts, DEFAULT_GAP_RATIO).unwrap();
        assert_eq!(md.dimension, 2);
        assert_eq!(md.agreement, 1.0);
        for e in &md.spectra {
            assert!((e[0] - 0.5).abs() < 1e-10 && (e[1] - 0.5).abs() < 1e-10 && e[2].abs() < 1e-10);
        }
    }

    #[test]
    fn spin_half_distance_follows_bloch_overlap() {
        let cfg = spin(1);
        let theta: f64 = 1.1;
        let a = quasi_coherent_state(&cfg, &[0.0, 0.0, 1.0]).unwrap();
        let b = quasi_coherent_state(&cfg, &[theta.sin(), 0.0, theta.cos()]).unwrap();
        let (d, phase) = quantum_distance(&a, &b).unwrap();
        assert!((d * d + (theta / 2.0).cos().ln()).abs() < 1e-12);
        let (d2, phase2) = quantum_distance(&b, &a).unwrap();
        assert!((d - d2).abs() < 1e-14 && (phase + phase2).abs() < 1e-14);
        let (d0, p0) = quantum_distance(&a, &a).unwrap();
        assert!(d0.abs() < 1e-7 && p0.abs() < 1e-14);
        let south = quasi_coherent_state(&cfg, &[0.0, 0.0, -1.0]).unwrap();
        assert!(quantum_distance(&a, &south).unwrap().0.is_infinite());
    }

    #[test]
    fn spin_sphere_degeneracy_sits_at_origin() {
        for two_j in [1, 3] {
            let cfg = spin(two_j);
            let slice = Slice::axes(3).unwrap();
            let bx = SearchBox::cube([0.05, -0.1, 0.07], 1.0).unwrap();
            let pts = find_degeneracy_points(&cfg, &slice, &bx, 4, 7).unwrap();
            assert_eq!(pts.len(), 1, "{pts:?}");
            assert!(pts[0].location.iter().all(|v| v.abs() < 1e-4), "{pts:?}");
            let again = find_degeneracy_points(&cfg, &slice, &bx, 4, 7).unwrap();
            assert_eq!(pts, again);
        }
    }

    #[test]
    fn monopole_charge_of_spin_spheres() {
        let slice = Slice::axes(3).unwrap();
        for (two_j, want) in [(1, 1), (3, 3)] {
            let cfg = spin(two_j);
            let coarse = chern_number(&cfg, &slice, [0.0; 3], 0.5, SphereGrid::default()).unwrap();
            let fine = chern_number(
                &cfg,
                &slice,
                [0.0; 3],
                0.5,
                SphereGrid {
                    n_theta: 48,
                    n_phi: 48,
                },
            )
            .unwrap();
            assert_eq!(coarse.abs(), want);
            assert_eq!(coarse, fine);
        }
    }

    #[test]
    fn empty_sphere_has_no_charge() {
        let slice = Slice::axes(3).unwrap();
        assert_eq!(
            chern_number(
                &spin(3),
                &slice,
                [2.0, 0.0, 0.0],
                0.5,
                SphereGrid::default()
            )
            .unwrap(),
            0
        );
    }

    #[test]
    fn sphere_through_degeneracy_is_rejected() {
        let slice = Slice::axes(3).unwrap();
        let err = chern_number(
            &spin(1),
            &slice,
            [0.0, 0.0, 0.5],
            0.5,
            SphereGrid::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateOnSphere { .. }), "{err:?}");
    }

    #[test]
    fn coarse_grid_is_reported() {
        let slice = Slice::axes(3).unwrap();
        let err = chern_number(
            &spin(9),
            &slice,
            [0.0; 3],
            0.5,
            SphereGrid {
                n_theta: 2,
                n_phi: 3,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::GridTooCoarse { .. }), "{err:?}");
    }

    /// Midpoint quadrature of the curvature two-form over the sphere.
    fn curvature_flux(cfg: &MatrixConfiguration, radius: f64, n: usize) -> f64 {
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..2 * n {
                let th = PI * (i as f64 + 0.5) / n as f64;
                let ph = PI * (j as f64 + 0.5) / n as f64;
                let x = [
                    radius * th.sin() * ph.cos(),
                    radius * th.sin() * ph.sin(),
                    radius * th.cos(),
                ];
                let e_th = [
                    radius * th.cos() * ph.cos(),
                    radius * th.cos() * ph.sin(),
                    -radius * th.sin(),
                ];
                let e_ph = [
                    -radius * th.sin() * ph.sin(),
                    radius * th.sin() * ph.cos(),
                    0.0,
                ];
                let w = qgt(cfg, &x).unwrap().omega;
                let mut f = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        f += w[a][b] * e_th[a] * e_ph[b];
                    }
                }
                total += f * (PI / n as f64).powi(2);
            }
        }
        total / (2.0 * PI)
    }

    #[test]
    fn lattice_charge_matches_curvature_quadrature() {
        let slice = Slice::axes(3).unwrap();
        for two_j in [1, 2] {
            let cfg = spin(two_j);
            let lattice =
                chern_measurement(&cfg, &slice, [0.0; 3], 0.7, SphereGrid::default()).unwrap();
            let flux = curvature_flux(&cfg, 0.7, 40);
            assert!(
                (lattice.raw - flux).abs() < 1e-2,
                "{} vs {flux}",
                lattice.raw
            );
        }
    }

    #[test]
    fn charges_assigned_per_point() {
        let cfg = spin(1);
        let slice = Slice::axes(3).unwrap();
        let bx = SearchBox::cube([0.0; 3], 1.0).unwrap();
        let mut pts = find_degeneracy_points(&cfg, &slice, &bx, 2, 1).unwrap();
        assign_charges(&cfg, &slice, &mut pts, SphereGrid::default(), 0.5).unwrap();
        assert_eq!(pts[0].charge.map(i64::abs), Some(1));
    }

    #[test]
    fn slice_validation() {
        assert!(Slice::axes(2).is_err());
        assert!(Slice::new(
            vec![0.0; 3],
            [
                vec![1.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0]
            ]
        )
        .is_err());
        let s = Slice::axes(4).unwrap();
        assert_eq!(s.embed([1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0, 0.0]);
        assert!(SearchBox::new([0.0; 3], [1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn gap_dimension_cases() {
        assert_eq!(gap_dimension(&[0.0, 0.0], 10.0), 0);
        assert_eq!(gap_dimension(&[1.0, 0.9, 0.01], 10.0), 2);
        assert_eq!(gap_dimension(&[1.0, 0.5, 0.3], 10.0), 3);
    }
}
