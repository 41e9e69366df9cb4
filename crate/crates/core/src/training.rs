//! QCML loss, its analytic gradient, and the Adam training loop.
//!
//! Per data point the loss is `sum_a [(<X_a> - x_a)^2 + w (<X_a^2> - <X_a>^2)]`
//! with expectations in the quasi-coherent state `|x>`. The gradient follows
//! from first-order perturbation theory of the ground state of `H(x)`.

use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherent::DisplacementModel;
use crate::configuration::MatrixConfiguration;
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{c, random_hermitian, CMatrix, CVector, HermitianMatrix};
use crate::seeded_rng;

/// Points whose gap is below `GRADIENT_GAP_REL * max(1, lambda_max)` are left
/// out of gradient steps: the resolvent blows up there.
pub const GRADIENT_GAP_REL: f64 = 1e-6;

/// Rows per reduction chunk when the reduction order is fixed.
const REDUCTION_CHUNK: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub hilbert_dim: usize,
    pub fluctuation_weight: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Sum per-point contributions in a fixed order so runs are bitwise
    /// reproducible regardless of thread count.
    pub deterministic_reduction: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            hilbert_dim: 8,
            fluctuation_weight: 0.1,
            learning_rate: 1e-2,
            epochs: 20_000,
            batch_size: 100,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            deterministic_reduction: true,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.hilbert_dim == 0 {
            return bad("hilbert_dim must be >= 1".into());
        }
        if !(self.fluctuation_weight > 0.0 && self.fluctuation_weight.is_finite()) {
            return bad(format!(
                "fluctuation weight must be > 0, got {}",
                self.fluctuation_weight
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("Adam epsilon must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Mean per-point loss of each epoch, accumulated while the epoch ran.
    pub epoch_losses: Vec<f64>,
    /// Mean per-point loss of the returned configuration over the full data.
    pub final_loss: f64,
    /// Point evaluations skipped because the ground state was (nearly) degenerate.
    pub degenerate_skips: usize,
    pub wall_time: Duration,
}

/// Progress handed to a training observer after each epoch.
#[derive(Clone, Copy, Debug)]
pub struct EpochSummary {
    pub epoch: usize,
    pub mean_loss: f64,
    pub skipped: usize,
}

/// Loss and gradient summed over a batch.
#[derive(Clone, Debug)]
pub struct Gradient {
    /// `G_b` with `dL = sum_b Tr(G_b dX_b)`.
    pub matrices: Vec<HermitianMatrix>,
    pub loss: f64,
    pub points: usize,
    pub skipped: usize,
}

/// Loss of one point given its state; `None` when degenerate.
fn point_loss(model: &DisplacementModel<'_>, x: &[f64], w: f64) -> Result<Option<f64>> {
    let state = model.state(x)?;
    if state.degenerate {
        return Ok(None);
    }
    let cp = model.cloud_point_from_state(&state);
    Ok(Some(cp.displacement_sq + w * cp.variance))
}

/// `sum_x [d^2(x) + w sigma^2(x)]` over the rows of `data`. Degenerate rows are
/// skipped and logged.
pub fn loss(cfg: &MatrixConfiguration, data: &Dataset, w: f64) -> Result<f64> {
    check_data(cfg, data)?;
    let model = DisplacementModel::new(cfg);
    let terms: Vec<Option<f64>> = data
        .rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|x| point_loss(&model, x, w))
        .collect::<Result<_>>()?;
    let skipped = terms.iter().filter(|t| t.is_none()).count();
    if skipped > 0 {
        log::info!("loss: {skipped} degenerate rows skipped");
    }
    Ok(terms.into_iter().flatten().sum())
}

fn check_data(cfg: &MatrixConfiguration, data: &Dataset) -> Result<()> {
    if data.n_features() != cfg.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.feature_dim(),
            found: data.n_features(),
        });
    }
    Ok(())
}

/// Running sums of loss and the non-Hermitian halves `K_b` of the gradient.
#[derive(Clone)]
struct Accumulator {
    loss: f64,
    k: Vec<CMatrix>,
    points: usize,
    skipped: usize,
}

impl Accumulator {
    fn new(n: usize, d: usize) -> Self {
        Self {
            loss: 0.0,
            k: vec![CMatrix::zeros(n, n); d],
            points: 0,
            skipped: 0,
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        self.loss += other.loss;
        for (a, b) in self.k.iter_mut().zip(&other.k) {
            *a += b;
        }
        self.points += other.points;
        self.skipped += other.skipped;
        self
    }

    fn into_gradient(self) -> Gradient {
        Gradient {
            matrices: self
                .k
                .iter()
                .map(|k| HermitianMatrix::from_hermitian_part(&(k + k.adjoint())))
                .collect(),
            loss: self.loss,
            points: self.points,
            skipped: self.skipped,
        }
    }
}

/// Adds one point's loss and gradient.
///
/// With `u_a = X_a psi`, `c_a = 2(1 - w)<X_a> - 2 x_a`, `A = sum_a c_a X_a + w S`
/// and the reduced resolvent `R = sum_{k>0} |k><k| / (lambda_0 - lambda_k)`,
/// let `phi = R A psi`. Then
/// `K_b = (c_b/2 psi + w u_b + (X_b - x_b) phi / 2) psi^dagger + (X_b - x_b) psi phi^dagger / 2`
/// and `G_b = K_b + K_b^dagger`.
fn accumulate_point(
    model: &DisplacementModel<'_>,
    x: &[f64],
    w: f64,
    acc: &mut Accumulator,
) -> Result<()> {
    let spec = model.spectrum(x)?;
    let n = spec.eigenvalues.len();
    let top = spec.eigenvalues[n - 1];
    if n > 1 && spec.gap <= GRADIENT_GAP_REL * top.max(1.0) {
        acc.skipped += 1;
        return Ok(());
    }
    let cfg = model.configuration();
    let psi: CVector = spec.eigenvectors.column(0).into_owned();
    let u: Vec<CVector> = cfg
        .observables()
        .iter()
        .map(|xa| xa.matrix() * &psi)
        .collect();
    let mut coef = Vec::with_capacity(u.len());
    let mut a_psi = model.sum_of_squares() * &psi * c(w, 0.0);
    for (ua, &xa) in u.iter().zip(x) {
        let mean = psi.dotc(ua).re;
        let second = ua.norm_squared();
        acc.loss += (mean - xa).powi(2) + w * (second - mean * mean);
        let ca = 2.0 * (1.0 - w) * mean - 2.0 * xa;
        a_psi.axpy(c(ca, 0.0), ua, c(1.0, 0.0));
        coef.push(ca);
    }
    let mut phi = CVector::zeros(n);
    for k in 1..n {
        let vk = spec.eigenvectors.column(k);
        let amp = vk.dotc(&a_psi) / (spec.eigenvalues[0] - spec.eigenvalues[k]);
        phi.axpy(amp, &vk, c(1.0, 0.0));
    }
    let half = c(0.5, 0.0);
    let one = c(1.0, 0.0);
    for (b, xb) in cfg.observables().iter().enumerate() {
        let shift = c(x[b], 0.0);
        // (X_b - x_b) phi
        let mut y_phi = xb.matrix() * &phi;
        y_phi.axpy(-shift, &phi, one);
        let mut left = y_phi * half;
        left.axpy(c(0.5 * coef[b], 0.0), &psi, one);
        left.axpy(c(w, 0.0), &u[b], one);
        let mut y_psi = u[b].clone();
        y_psi.axpy(-shift, &psi, one);
        acc.k[b].gerc(one, &left, &psi, one);
        acc.k[b].gerc(half, &y_psi, &phi, one);
    }
    acc.points += 1;
    Ok(())
}

fn accumulate_rows(
    model: &DisplacementModel<'_>,
    rows: &[&[f64]],
    w: f64,
    deterministic: bool,
) -> Result<Accumulator> {
    let cfg = model.configuration();
    let (n, d) = (cfg.hilbert_dim(), cfg.feature_dim());
    let chunk = |chunk: &[&[f64]]| -> Result<Accumulator> {
        let mut acc = Accumulator::new(n, d);
        for x in chunk {
            accumulate_point(model, x, w, &mut acc)?;
        }
        Ok(acc)
    };
    if deterministic {
        let parts: Vec<Accumulator> = rows
            .par_chunks(REDUCTION_CHUNK)
            .map(chunk)
            .collect::<Result<_>>()?;
        Ok(parts.iter().fold(Accumulator::new(n, d), |a, b| a.merge(b)))
    } else {
        rows.par_chunks(REDUCTION_CHUNK)
            .map(chunk)
            .try_reduce(|| Accumulator::new(n, d), |a, b| Ok(a.merge(&b)))
    }
}

/// Gradient of [`loss`] with respect to each observable, summed over rows.
/// Points with gap below the resolvent cutoff are skipped and counted.
pub fn loss_gradient(cfg: &MatrixConfiguration, data: &Dataset, w: f64) -> Result<Gradient> {
    check_data(cfg, data)?;
    let model = DisplacementModel::new(cfg);
    let rows: Vec<&[f64]> = data.rows().collect();
    Ok(accumulate_rows(&model, &rows, w, true)?.into_gradient())
}

/// Random Hermitian `X_a` with Frobenius norm `sqrt(N) * std_a`, shifted by
/// `mean_a * I`. Constant features give `X_a = mean_a * I` exactly.
pub fn initialize(n: usize, d: usize, data: &Dataset, seed: u64) -> Result<MatrixConfiguration> {
    if n == 0 {
        return Err(Error::Validation("hilbert_dim must be >= 1".into()));
    }
    if data.n_features() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: data.n_features(),
        });
    }
    let t = data.len() as f64;
    let mut rng = seeded_rng(seed);
    let observables = (0..d)
        .map(|a| {
            let col = data.column(a);
            let mean = col.iter().sum::<f64>() / t;
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t).sqrt();
            let r = random_hermitian(n, &mut rng);
            let norm = r.norm();
            let base = if std > 0.0 && norm > 0.0 {
                r.scale(std * (n as f64).sqrt() / norm)
            } else {
                HermitianMatrix::zeros(n)
            };
            base.shifted(mean)
        })
        .collect();
    MatrixConfiguration::new(observables)
}

fn pack_len(n: usize) -> usize {
    n * n
}

/// Real coordinates of a configuration: per observable, the diagonal, then
/// `(Re, Im)` of each upper-triangular entry.
fn pack_config(cfg: &MatrixConfiguration) -> Vec<f64> {
    let n = cfg.hilbert_dim();
    let mut out = Vec::with_capacity(cfg.feature_dim() * pack_len(n));
    for x in cfg.observables() {
        let m = x.matrix();
        for i in 0..n {
            out.push(m[(i, i)].re);
        }
        for i in 0..n {
            for j in i + 1..n {
                out.push(m[(i, j)].re);
                out.push(m[(i, j)].im);
            }
        }
    }
    out
}

/// Partial derivatives of `L` in the coordinates of [`pack_config`]:
/// `G_ii` on the diagonal, `2 Re G_ij` and `2 Im G_ij` off it.
fn pack_gradient(g: &[HermitianMatrix], n: usize, scale: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.len() * pack_len(n));
    for gb in g {
        let m = gb.matrix();
        for i in 0..n {
            out.push(scale * m[(i, i)].re);
        }
        for i in 0..n {
            for j in i + 1..n {
                out.push(2.0 * scale * m[(i, j)].re);
                out.push(2.0 * scale * m[(i, j)].im);
            }
        }
    }
    out
}

fn unpack_config(p: &[f64], n: usize, d: usize) -> Result<MatrixConfiguration> {
    let stride = pack_len(n);
    let observables = (0..d)
        .map(|b| {
            let q = &p[b * stride..(b + 1) * stride];
            let mut m = CMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = c(q[i], 0.0);
            }
            let mut k = n;
            for i in 0..n {
                for j in i + 1..n {
                    let z = c(q[k], q[k + 1]);
                    m[(i, j)] = z;
                    m[(j, i)] = z.conj();
                    k += 2;
                }
            }
            HermitianMatrix::new(m)
        })
        .collect::<Result<_>>()?;
    MatrixConfiguration::new(observables)
}

/// Adam over the real coordinates of the configuration.
#[derive(Clone, Debug)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(len: usize, tc: &TrainingConfig) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr: tc.learning_rate,
            beta1: tc.adam_beta1,
            beta2: tc.adam_beta2,
            eps: tc.adam_epsilon,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grad[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            let mh = self.m[k] / bc1;
            let vh = self.v[k] / bc2;
            params[k] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Trains from [`initialize`] with `tc.seed`.
pub fn train(data: &Dataset, tc: &TrainingConfig) -> Result<(MatrixConfiguration, TrainingReport)> {
    let init = initialize(tc.hilbert_dim, data.n_features(), data, tc.seed)?;
    train_from(init, data, tc, |_, _| ControlFlow::Continue(()))
}

/// Mini-batch Adam on the mean per-point loss, starting from `init`.
///
/// Rows are shuffled each epoch; quasi-coherent states are recomputed for
/// every mini-batch. `observer` runs after each epoch and may stop training
/// early by returning `Break`.
pub fn train_from<F>(
    init: MatrixConfiguration,
    data: &Dataset,
    tc: &TrainingConfig,
    mut observer: F,
) -> Result<(MatrixConfiguration, TrainingReport)>
where
    F: FnMut(&EpochSummary, &MatrixConfiguration) -> ControlFlow<()>,
{
    tc.validate()?;
    check_data(&init, data)?;
    if init.hilbert_dim() != tc.hilbert_dim {
        return Err(Error::DimensionMismatch {
            expected: tc.hilbert_dim,
            found: init.hilbert_dim(),
        });
    }
    let start = Instant::now();
    let (n, d) = (init.hilbert_dim(), init.feature_dim());
    let w = tc.fluctuation_weight;
    // batch order and any other randomness come from a stream separate from initialization
    let mut rng = seeded_rng(tc.seed ^ 0x0005_eed0_fba7_c4e5);
    let mut params = pack_config(&init);
    let mut cfg = init;
    let mut adam = Adam::new(params.len(), tc);
    let rows: Vec<&[f64]> = data.rows().collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut epoch_losses = Vec::with_capacity(tc.epochs);
    let mut total_skipped = 0;

    for epoch in 0..tc.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_points = 0;
        let mut epoch_skipped = 0;
        for (bi, batch) in order.chunks(tc.batch_size).enumerate() {
            let batch_rows: Vec<&[f64]> = batch.iter().map(|&i| rows[i]).collect();
            let model = DisplacementModel::new(&cfg);
            let acc = accumulate_rows(&model, &batch_rows, w, tc.deterministic_reduction)?;
            epoch_skipped += acc.skipped;
            if acc.points == 0 {
                continue;
            }
            if !acc.loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss at epoch {epoch}, batch {bi}"
                )));
            }
            epoch_loss += acc.loss;
            epoch_points += acc.points;
            let scale = 1.0 / acc.points as f64;
            let g = acc.into_gradient();
            let grad = pack_gradient(&g.matrices, n, scale);
            if grad.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient at epoch {epoch}, batch {bi}"
                )));
            }
            adam.step(&mut params, &grad);
            cfg = unpack_config(&params, n, d)?;
        }
        total_skipped += epoch_skipped;
        let mean_loss = if epoch_points > 0 {
            epoch_loss / epoch_points as f64
        } else {
            f64::NAN
        };
        if epoch_points == 0 {
            return Err(Error::Numeric(format!(
                "every point was degenerate in epoch {epoch}"
            )));
        }
        epoch_losses.push(mean_loss);
        log::debug!("epoch {epoch}: mean loss {mean_loss:.6e}, skipped {epoch_skipped}");
        let summary = EpochSummary {
            epoch,
            mean_loss,
            skipped: epoch_skipped,
        };
        if observer(&summary, &cfg).is_break() {
            break;
        }
    }

    let model = DisplacementModel::new(&cfg);
    let final_acc = accumulate_rows(&model, &rows, w, true)?;
    let final_loss = if final_acc.points > 0 {
        final_acc.loss / final_acc.points as f64
    } else {
        return Err(Error::Numeric(
            "every point is degenerate for the trained configuration".into(),
        ));
    };
    Ok((
        cfg,
        TrainingReport {
            epoch_losses,
            final_loss,
            degenerate_skips: total_skipped,
            wall_time: start.elapsed(),
        },
    ))
}
