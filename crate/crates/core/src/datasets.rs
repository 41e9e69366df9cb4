//! Synthetic datasets, CSV ingestion and standard scaling.
//!
//! Every generator is a pure function of its parameters and seed.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, CMatrix, HermitianMatrix, C64};
use crate::seeded_rng;

/// Generator name, parameters and seed of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
}

impl Provenance {
    fn new(generator: &str, parameters: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            generator: generator.into(),
            parameters,
            seed,
        }
    }
}

/// `T x D` table of finite reals, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n_features: usize,
    pub feature_names: Option<Vec<String>>,
    pub provenance: Provenance,
    /// Per-row class labels, when the generator knows them.
    pub labels: Option<Vec<usize>>,
    /// Per-row generator parameters (e.g. the map parameters of conformal data).
    pub row_parameters: Option<Vec<Vec<f64>>>,
}

impl Dataset {
    pub fn from_flat(values: Vec<f64>, n_features: usize) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::Validation(
                "a dataset needs at least one feature".into(),
            ));
        }
        if values.is_empty() {
            return Err(Error::Validation("a dataset needs at least one row".into()));
        }
        if !values.len().is_multiple_of(n_features) {
            return Err(Error::Validation(format!(
                "{} values do not fill rows of width {n_features}",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite value at row {}, column {}",
                k / n_features,
                k % n_features
            )));
        }
        Ok(Self {
            values,
            n_features,
            feature_names: None,
            provenance: Provenance::new("manual", json!({}), None),
            labels: None,
            row_parameters: None,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, n_features: usize) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_features {
                return Err(Error::Parse {
                    row: i,
                    col: r.len().min(n_features),
                    msg: format!("expected {n_features} values, found {}", r.len()),
                });
            }
        }
        Self::from_flat(rows.concat(), n_features)
    }

    fn generated(values: Vec<f64>, n_features: usize, provenance: Provenance) -> Result<Self> {
        let mut ds = Self::from_flat(values, n_features)?;
        ds.provenance = provenance;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.n_features
    }

    /// Always false for a validly constructed dataset.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.n_features)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    /// The rows at `indices`, keeping labels and row parameters.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        let mut ds = Self::from_flat(values, self.n_features)?;
        ds.feature_names = self.feature_names.clone();
        ds.provenance = self.provenance.clone();
        ds.labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        ds.row_parameters = self
            .row_parameters
            .as_ref()
            .map(|p| indices.iter().map(|&i| p[i].clone()).collect());
        Ok(ds)
    }

    /// Headerless CSV, values in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for row in self.rows() {
            wr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn check_count(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::Validation(format!(
            "need at least {min} points, got {n}"
        )));
    }
    Ok(())
}

fn noise(sigma: f64) -> Result<Option<Normal<f64>>> {
    if sigma == 0.0 {
        return Ok(None);
    }
    Normal::new(0.0, sigma)
        .map(Some)
        .map_err(|_| Error::Validation(format!("noise sigma must be finite and >= 0, got {sigma}")))
}

fn unit_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-12 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

fn sphere_point<R: Rng + ?Sized>(
    rng: &mut R,
    radius: f64,
    center: [f64; 3],
    noise: Option<&Normal<f64>>,
) -> [f64; 3] {
    let u = unit_direction(rng, 3);
    let mut p = [0.0; 3];
    for k in 0..3 {
        p[k] = center[k] + radius * u[k];
    }
    if let Some(nz) = noise {
        for v in &mut p {
            *v += nz.sample(rng);
        }
    }
    p
}

/// Uniform points on a sphere (normalized Gaussian directions) plus isotropic Gaussian noise.
pub fn sphere_uniform(
    n: usize,
    radius: f64,
    center: [f64; 3],
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    check_count(n, 1)?;
    if !(radius > 0.0) {
        return Err(Error::Validation(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let nz = noise(noise_sigma)?;
    let mut rng = seeded_rng(seed);
    let values = (0..n)
        .flat_map(|_| sphere_point(&mut rng, radius, center, nz.as_ref()))
        .collect();
    Dataset::generated(
        values,
        3,
        Provenance::new(
            "sphere_uniform",
            json!({"n": n, "radius": radius, "center": center, "noise_sigma": noise_sigma}),
            Some(seed),
        ),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSpheresParams {
    pub centers: [[f64; 3]; 2],
    pub radii: [f64; 2],
    /// Split points in proportion to surface area instead of 50/50.
    pub area_weighted: bool,
}

impl Default for TwoSpheresParams {
    fn default() -> Self {
        Self {
            centers: [[0.0, 0.0, 0.0], [0.0, 0.0, 3.0]],
            radii: [1.5, 1.0],
            area_weighted: false,
        }
    }
}

/// Points on two spheres; label `k` marks the sphere a row was drawn from.
pub fn two_spheres(
    n: usize,
    params: &TwoSpheresParams,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    check_count(n, 2)?;
    if params.radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Validation("sphere radii must be positive".into()));
    }
    let nz = noise(noise_sigma)?;
    let first = if params.area_weighted {
        let [r0, r1] = params.radii;
        ((n as f64 * r0 * r0 / (r0 * r0 + r1 * r1)).round() as usize).clamp(1, n - 1)
    } else {
        n.div_ceil(2)
    };
    let mut rng = seeded_rng(seed);
    let mut values = Vec::with_capacity(3 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = usize::from(i >= first);
        values.extend(sphere_point(
            &mut rng,
            params.radii[k],
            params.centers[k],
            nz.as_ref(),
        ));
        labels.push(k);
    }
    let mut ds = Dataset::generated(
        values,
        3,
        Provenance::new(
            "two_spheres",
            json!({"n": n, "params": params, "noise_sigma": noise_sigma}),
            Some(seed),
        ),
    )?;
    ds.labels = Some(labels);
    Ok(ds)
}

/// Unit sphere with density proportional to `(1 + cos theta)^2`, by rejection on `cos theta`.
pub fn sphere_nonuniform(n: usize, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    check_count(n, 1)?;
    let nz = noise(noise_sigma)?;
    let mut rng = seeded_rng(seed);
    let mut values = Vec::with_capacity(3 * n);
    for _ in 0..n {
        // area measure is uniform in u = cos(theta); envelope max of (1+u)^2 is 4
        let u = loop {
            let u: f64 = rng.random_range(-1.0..=1.0);
            let accept: f64 = rng.random();
            if 4.0 * accept <= (1.0 + u) * (1.0 + u) {
                break u;
            }
        };
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let s = (1.0 - u * u).max(0.0).sqrt();
        let mut p = [s * phi.cos(), s * phi.sin(), u];
        if let Some(nz) = nz.as_ref() {
            for v in &mut p {
                *v += nz.sample(&mut rng);
            }
        }
        values.extend(p);
    }
    Dataset::generated(
        values,
        3,
        Provenance::new(
            "sphere_nonuniform",
            json!({"n": n, "noise_sigma": noise_sigma}),
            Some(seed),
        ),
    )
}

/// Disk automorphism `e^{i theta} (a - z) / (1 - conj(a) z)`.
pub fn disk_map(a: C64, theta: f64, z: C64) -> C64 {
    C64::from_polar(1.0, theta) * (a - z) / (C64::new(1.0, 0.0) - a.conj() * z)
}

/// `(I - a a^dagger)^{-1/2}` through a Hermitian eigendecomposition.
fn inverse_sqrt_defect(a: &[C64]) -> Result<CMatrix> {
    let n = a.len();
    let av = CMatrix::from_column_slice(n, 1, a);
    let m = HermitianMatrix::from_hermitian_part(&(CMatrix::identity(n, n) - &av * av.adjoint()));
    let e = hermitian_eig(&m);
    if e.eigenvalues[0] <= 0.0 {
        return Err(Error::Validation(
            "ball map parameter must satisfy ||a|| < 1".into(),
        ));
    }
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        e.eigenvalues.iter().map(|l| C64::new(1.0 / l.sqrt(), 0.0)),
    ));
    Ok(&e.eigenvectors * d * e.eigenvectors.adjoint())
}

/// Prepared Blaschke-Potapov factor
/// `f(z) = e^{i theta} sqrt(1 - ||a||^2) (I - a a^dagger)^{-1/2} (a - z) / (1 - <a|z>)`,
/// an automorphism of the complex unit ball.
#[derive(Clone, Debug)]
pub struct BallMap {
    a: Vec<C64>,
    prefactor: CMatrix,
}

impl BallMap {
    pub fn new(a: &[C64], theta: f64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Validation("ball dimension must be >= 1".into()));
        }
        let norm_sq: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        if !(norm_sq < 1.0) {
            return Err(Error::Validation(format!(
                "ball map parameter must satisfy ||a|| < 1, got {}",
                norm_sq.sqrt()
            )));
        }
        let phase = C64::from_polar((1.0 - norm_sq).sqrt(), theta);
        Ok(Self {
            a: a.to_vec(),
            prefactor: inverse_sqrt_defect(a)? * phase,
        })
    }

    pub fn apply(&self, z: &[C64]) -> Result<Vec<C64>> {
        if z.len() != self.a.len() {
            return Err(Error::DimensionMismatch {
                expected: self.a.len(),
                found: z.len(),
            });
        }
        let inner: C64 = self.a.iter().zip(z).map(|(a, z)| a.conj() * z).sum();
        let denom = C64::new(1.0, 0.0) - inner;
        let v = nalgebra::DVector::from_iterator(
            z.len(),
            self.a.iter().zip(z).map(|(a, z)| (a - z) / denom),
        );
        Ok((&self.prefactor * v).iter().copied().collect())
    }
}

fn ball_point<R: Rng + ?Sized>(rng: &mut R, complex_dim: usize, radius: f64) -> Vec<C64> {
    let u = unit_direction(rng, 2 * complex_dim);
    let r = radius * rng.random::<f64>().powf(1.0 / (2 * complex_dim) as f64);
    u.chunks_exact(2)
        .map(|p| C64::new(r * p[0], r * p[1]))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalParams {
    pub n_maps: usize,
    pub n_ref: usize,
    pub a_max: f64,
    /// Draw `theta` uniformly per map instead of fixing it to 0.
    pub random_theta: bool,
}

impl Default for ConformalParams {
    fn default() -> Self {
        Self {
            n_maps: 2000,
            n_ref: 100,
            a_max: 0.9,
            random_theta: false,
        }
    }
}

/// Each row lists the images `(Re f, Im f)` of the shared reference points
/// under one disk automorphism. Row parameters are `[Re a, Im a, theta]`.
pub fn conformal_maps(params: &ConformalParams, seed: u64) -> Result<Dataset> {
    check_count(params.n_maps, 1)?;
    check_count(params.n_ref, 1)?;
    if !(params.a_max >= 0.0 && params.a_max < 1.0) {
        return Err(Error::Validation(format!(
            "a_max must lie in [0, 1), got {}",
            params.a_max
        )));
    }
    let mut rng = seeded_rng(seed);
    let refs: Vec<C64> = (0..params.n_ref)
        .map(|_| ball_point(&mut rng, 1, 1.0)[0])
        .collect();
    let mut values = Vec::with_capacity(params.n_maps * 2 * params.n_ref);
    let mut row_parameters = Vec::with_capacity(params.n_maps);
    for _ in 0..params.n_maps {
        let a = ball_point(&mut rng, 1, params.a_max)[0];
        let theta = if params.random_theta {
            rng.random_range(0.0..2.0 * PI)
        } else {
            0.0
        };
        for &z in &refs {
            let w = disk_map(a, theta, z);
            values.extend([w.re, w.im]);
        }
        row_parameters.push(vec![a.re, a.im, theta]);
    }
    let reference: Vec<[f64; 2]> = refs.iter().map(|z| [z.re, z.im]).collect();
    let mut ds = Dataset::generated(
        values,
        2 * params.n_ref,
        Provenance::new(
            "conformal_maps",
            json!({"params": params, "reference_points": reference}),
            Some(seed),
        ),
    )?;
    ds.row_parameters = Some(row_parameters);
    Ok(ds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallMapParams {
    pub n_maps: usize,
    pub n_ref: usize,
    /// Complex dimension `n` of the ball.
    pub ball_dim: usize,
    pub a_max: f64,
    pub random_theta: bool,
}

/// Ball analogue of [`conformal_maps`]. Each row interleaves real and
/// imaginary parts of all `n` components of every reference image, so
/// `D = 2 n n_ref`. Row parameters are `[Re a_1, Im a_1, ..., theta]`.
pub fn blaschke_potapov(params: &BallMapParams, seed: u64) -> Result<Dataset> {
    check_count(params.n_maps, 1)?;
    check_count(params.n_ref, 1)?;
    if params.ball_dim == 0 {
        return Err(Error::Validation("ball dimension must be >= 1".into()));
    }
    if !(params.a_max >= 0.0 && params.a_max < 1.0) {
        return Err(Error::Validation(format!(
            "a_max must lie in [0, 1), got {}",
            params.a_max
        )));
    }
    let n = params.ball_dim;
    let mut rng = seeded_rng(seed);
    let refs: Vec<Vec<C64>> = (0..params.n_ref)
        .map(|_| ball_point(&mut rng, n, 1.0))
        .collect();
    let mut values = Vec::with_capacity(params.n_maps * 2 * n * params.n_ref);
    let mut row_parameters = Vec::with_capacity(params.n_maps);
    for _ in 0..params.n_maps {
        let a = ball_point(&mut rng, n, params.a_max);
        let theta = if params.random_theta {
            rng.random_range(0.0..2.0 * PI)
        } else {
            0.0
        };
        let map = BallMap::new(&a, theta)?;
        for z in &refs {
            for w in map.apply(z)? {
                values.extend([w.re, w.im]);
            }
        }
        let mut p: Vec<f64> = a.iter().flat_map(|z| [z.re, z.im]).collect();
        p.push(theta);
        row_parameters.push(p);
    }
    let reference: Vec<Vec<f64>> = refs
        .iter()
        .map(|z| z.iter().flat_map(|w| [w.re, w.im]).collect())
        .collect();
    let mut ds = Dataset::generated(
        values,
        2 * n * params.n_ref,
        Provenance::new(
            "blaschke_potapov",
            json!({"params": params, "reference_points": reference}),
            Some(seed),
        ),
    )?;
    ds.row_parameters = Some(row_parameters);
    Ok(ds)
}

/// Per-feature affine map `x -> (x - mean) / std`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub mean: Vec<f64>,
    /// Population standard deviations; zero for constant features.
    pub std: Vec<f64>,
}

impl Scaling {
    pub fn inverse(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| m + v * s)
            .collect()
    }
}

/// Standardizes each column to zero mean and unit population variance.
/// Constant columns become zero.
pub fn standard_scale(ds: &Dataset) -> (Dataset, Scaling) {
    let t = ds.len() as f64;
    let d = ds.n_features();
    let mut mean = vec![0.0; d];
    for row in ds.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= t);
    let mut var = vec![0.0; d];
    for row in ds.rows() {
        for k in 0..d {
            var[k] += (row[k] - mean[k]).powi(2);
        }
    }
    let std: Vec<f64> = var.iter().map(|v| (v / t).sqrt()).collect();
    for (k, s) in std.iter().enumerate() {
        if *s == 0.0 {
            log::warn!("feature {k} is constant; scaled to zero");
        }
    }
    let values = ds
        .rows()
        .flat_map(|row| {
            row.iter()
                .enumerate()
                .map(|(k, v)| {
                    if std[k] > 0.0 {
                        (v - mean[k]) / std[k]
                    } else {
                        0.0
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut out = ds.clone();
    out.values = values;
    (out, Scaling { mean, std })
}

/// Rectangular numeric CSV. Feature names are taken from the header when present.
pub fn read_csv<R: Read>(reader: R, has_header: bool) -> Result<Dataset> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names = if has_header {
        Some(rd.headers()?.iter().map(str::to_string).collect::<Vec<_>>())
    } else {
        None
    };
    let mut width = names.as_ref().map(Vec::len);
    let mut values = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let rec = rec?;
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Parse {
                row,
                col: rec.len().min(w),
                msg: format!("expected {w} columns, found {}", rec.len()),
            });
        }
        for (col, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col,
                msg: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    col,
                    msg: format!("non-finite value {cell:?}"),
                });
            }
            values.push(v);
        }
    }
    let width = width.ok_or_else(|| Error::Validation("CSV input is empty".into()))?;
    if values.is_empty() {
        return Err(Error::Validation("CSV input has no data rows".into()));
    }
    let mut ds = Dataset::from_flat(values, width)?;
    ds.feature_names = names;
    Ok(ds)
}

pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let mut ds = read_csv(std::fs::File::open(path)?, has_header)?;
    ds.provenance = Provenance::new("csv", json!({"path": path.display().to_string()}), None);
    Ok(ds)
}

/// Breast-cancer diagnostic table: 569 rows of 30 features.
///
/// Accepts either the raw UCI layout (`id, M|B, 30 features`, no header),
/// in which case labels are 1 for malignant and 0 for benign, or a plain
/// numeric CSV with 30 columns and an optional header line.
pub fn load_wbc(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let first = text.lines().next().unwrap_or("");
    let fields: Vec<&str> = first.split(',').map(str::trim).collect();
    let ds = if fields.len() == 32 && matches!(fields[1], "M" | "B") {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (row, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 32 {
                return Err(Error::Parse {
                    row,
                    col: cells.len().min(32),
                    msg: format!("expected 32 columns, found {}", cells.len()),
                });
            }
            labels.push(match cells[1] {
                "M" => 1,
                "B" => 0,
                other => {
                    return Err(Error::Parse {
                        row,
                        col: 1,
                        msg: format!("unknown diagnosis {other:?}"),
                    })
                }
            });
            for (col, cell) in cells.iter().enumerate().skip(2) {
                values.push(cell.parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    col,
                    msg: format!("not a number: {cell:?}"),
                })?);
            }
        }
        let mut ds = Dataset::from_flat(values, 30)?;
        ds.labels = Some(labels);
        ds
    } else {
        let has_header = fields.iter().any(|f| f.parse::<f64>().is_err());
        read_csv(text.as_bytes(), has_header)?
    };
    if ds.n_features() != 30 {
        return Err(Error::Validation(format!(
            "expected 30 features, found {}",
            ds.n_features()
        )));
    }
    let mut ds = ds;
    ds.provenance = Provenance::new("wbc", json!({"path": path.display().to_string()}), None);
    Ok(ds)
}
