//! Forecast scoring, hyperparameter search, and a synthetic benchmark.

use std::f64::consts::PI;
use std::io::Write;
use std::ops::Range;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::data::MaskedMatrix;
use crate::error::{Error, Result};
use crate::forecast::rolling_forecast;
use crate::model::ModelConfig;
use crate::solvers::VarCoefficients;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// Mean absolute percentage error, in percent.
    pub mape: f64,
    pub rmse: f64,
    /// Observed entries scored by RMSE.
    pub n_evaluated: usize,
    /// Observed entries with non-zero actual, scored by MAPE.
    pub n_percentage: usize,
}

fn check_shape(actual: &MaskedMatrix, predicted: &DMatrix<f64>) -> Result<()> {
    if predicted.shape() != (actual.n_rows(), actual.n_cols()) {
        return Err(Error::Dimension(format!(
            "predictions are {:?}, actuals are {}x{}",
            predicted.shape(),
            actual.n_rows(),
            actual.n_cols()
        )));
    }
    Ok(())
}

fn observed_pairs<'a>(
    actual: &'a MaskedMatrix,
    predicted: &'a DMatrix<f64>,
) -> impl Iterator<Item = (f64, f64)> + 'a {
    (0..actual.n_cols()).flat_map(move |t| {
        actual
            .column_observed(t)
            .unwrap_or(&[])
            .iter()
            .map(move |&i| (actual.values()[(i, t)], predicted[(i, t)]))
    })
}

/// MAPE over observed entries with non-zero actual values.
pub fn mape(actual: &MaskedMatrix, predicted: &DMatrix<f64>) -> Result<f64> {
    check_shape(actual, predicted)?;
    let (sum, n) = observed_pairs(actual, predicted)
        .filter(|(y, _)| *y != 0.0)
        .fold((0.0, 0usize), |(s, n), (y, p)| {
            (s + (y - p).abs() / y.abs(), n + 1)
        });
    if n == 0 {
        return Err(Error::NothingToScore);
    }
    Ok(100.0 * sum / n as f64)
}

/// RMSE over observed entries.
pub fn rmse(actual: &MaskedMatrix, predicted: &DMatrix<f64>) -> Result<f64> {
    check_shape(actual, predicted)?;
    let (sum, n) = observed_pairs(actual, predicted).fold((0.0, 0usize), |(s, n), (y, p)| {
        (s + (y - p) * (y - p), n + 1)
    });
    if n == 0 {
        return Err(Error::NothingToScore);
    }
    Ok((sum / n as f64).sqrt())
}

pub fn score(actual: &MaskedMatrix, predicted: &DMatrix<f64>) -> Result<MetricReport> {
    let rmse = rmse(actual, predicted)?;
    let mape = mape(actual, predicted)?;
    Ok(MetricReport {
        mape,
        rmse,
        n_evaluated: actual.observed_count(),
        n_percentage: observed_pairs(actual, predicted)
            .filter(|(y, _)| *y != 0.0)
            .count(),
    })
}

/// Contiguous, adjacent train and validation column ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Range<usize>,
    pub validation: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub lambda: f64,
    pub rho: f64,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub best: GridCell,
    /// One row per `(λ, ρ)` pair, λ-major in grid order.
    pub table: Vec<GridCell>,
}

/// Fits on the training range and rolling-forecasts the validation range for
/// each `(λ, ρ)`. Selection minimizes validation MAPE, then RMSE, then λ,
/// then ρ.
pub fn grid_search(
    y: &MaskedMatrix,
    split: &Split,
    base: &ModelConfig,
    horizon: usize,
    lambdas: &[f64],
    rhos: &[f64],
) -> Result<GridSearch> {
    if lambdas.is_empty() || rhos.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    if split.train.is_empty()
        || split.validation.is_empty()
        || split.train.end != split.validation.start
        || split.validation.end > y.n_cols()
    {
        return Err(Error::Config(format!(
            "train {:?} and validation {:?} must be non-empty, adjacent, and within {} columns",
            split.train,
            split.validation,
            y.n_cols()
        )));
    }
    let windows = split.validation.len() / horizon.max(1);
    if horizon == 0 || windows == 0 {
        return Err(Error::Config(format!(
            "horizon {horizon} does not fit in a validation range of {}",
            split.validation.len()
        )));
    }
    let data = y.columns(split.train.start..split.validation.end)?;
    let train_len = split.train.len();
    let scored = data.columns(train_len..train_len + horizon * windows)?;

    let cells: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| rhos.iter().map(move |&r| (l, r)))
        .collect();
    let table = cells
        .par_iter()
        .map(|&(lambda, rho)| {
            let config = ModelConfig {
                lambda,
                rho,
                ..base.clone()
            };
            let run = rolling_forecast(&data, &config, train_len, horizon, windows)?;
            Ok(GridCell {
                lambda,
                rho,
                report: score(&scored, &run.forecast.values)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let best = *table
        .iter()
        .min_by(|a, b| {
            a.report
                .mape
                .total_cmp(&b.report.mape)
                .then(a.report.rmse.total_cmp(&b.report.rmse))
                .then(a.lambda.total_cmp(&b.lambda))
                .then(a.rho.total_cmp(&b.rho))
        })
        .expect("grid is non-empty");
    Ok(GridSearch { best, table })
}

/// Writes the score table as `lambda,rho,mape,rmse` CSV.
pub fn write_score_table<W: Write>(mut out: W, table: &[GridCell]) -> std::io::Result<()> {
    writeln!(out, "lambda,rho,mape,rmse")?;
    for c in table {
        writeln!(
            out,
            "{},{},{},{}",
            c.lambda, c.rho, c.report.mape, c.report.rmse
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_series: usize,
    pub n_steps: usize,
    pub rank: usize,
    pub season: usize,
    pub order: usize,
    pub noise_sd: f64,
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_series: 60,
            n_steps: 420,
            rank: 4,
            season: 28,
            order: 2,
            noise_sd: 0.1,
            missing_rate: 0.6,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    /// Noisy observations under the sampled mask.
    pub observed: MaskedMatrix,
    /// Noisy observations before masking.
    pub full: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub x: DMatrix<f64>,
    /// VAR driving the season-differenced latent residual.
    pub coeffs: VarCoefficients,
}

/// Level carried by the first latent factor; keeps observations away from zero.
const LEVEL: f64 = 10.0;
const HARMONICS: usize = 3;
const INNOVATION_SD: f64 = 0.15;
const BURN_IN: usize = 200;

/// Generates a low-rank seasonal panel.
///
/// Latent factors combine period-`m` harmonics, a small linear trend, and a
/// residual `z` that is seasonally integrated (`z_{t+m} = z_t + e_t`) with `e`
/// a stationary VAR(`d`). Factor 0 additionally carries a constant level with
/// positive loadings so every series sits well above zero.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Synthetic> {
    let SyntheticSpec {
        n_series: n,
        n_steps: t_len,
        rank,
        season: m,
        order: d,
        noise_sd,
        missing_rate,
        seed,
    } = *spec;
    if n == 0 || rank == 0 || d == 0 || m == 0 {
        return Err(Error::Config(
            "series count, rank, order, and season must all be positive".into(),
        ));
    }
    if t_len <= d + 2 * m {
        return Err(Error::SeriesTooShort {
            order: d,
            season: 2 * m,
            first_order: false,
            len: t_len,
        });
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::Config(format!(
            "noise_sd must be >= 0, got {noise_sd}"
        )));
    }
    if !(0.0..1.0).contains(&missing_rate) {
        return Err(Error::Config(format!(
            "missing_rate must lie in [0, 1), got {missing_rate}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    // Stationary VAR: Σ_k ‖A_k‖₂ ≤ Σ_k ‖A_k‖_F = 0.85 < 1.
    let weights: Vec<f64> = (1..=d).map(|k| 0.5f64.powi(k as i32)).collect();
    let total: f64 = weights.iter().sum();
    let blocks: Vec<DMatrix<f64>> = weights
        .iter()
        .map(|wk| {
            let g = DMatrix::from_fn(rank, rank, |r, c| normal() * if r == c { 1.0 } else { 0.3 });
            let norm = g.norm().max(f64::MIN_POSITIVE);
            g * (0.85 * wk / total / norm)
        })
        .collect();
    let coeffs = VarCoefficients::from_blocks(&blocks, false)?;

    let mut w = DMatrix::from_fn(rank, n, |_, _| normal());
    for i in 0..n {
        w[(0, i)] = 1.0 + 0.1 * w[(0, i)];
    }

    let amps = DMatrix::from_fn(rank, HARMONICS, |_, h| normal() / (h + 1) as f64);
    let phases = DMatrix::from_fn(rank, HARMONICS, |_, _| 2.0 * PI * normal());
    let slopes: Vec<f64> = (0..rank).map(|_| 0.002 * normal()).collect();

    let innovations = BURN_IN + t_len;
    let mut e: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(innovations);
    for s in 0..innovations {
        let mut next = nalgebra::DVector::from_fn(rank, |_, _| INNOVATION_SD * normal());
        for k in 1..=d {
            if s >= k {
                next.gemv(1.0, &coeffs.block(k), &e[s - k], 1.0);
            }
        }
        e.push(next);
    }
    let e = &e[BURN_IN..];

    let mut x = DMatrix::zeros(rank, t_len);
    let mut z = DMatrix::zeros(rank, t_len);
    for t in m..t_len {
        let prev = z.column(t - m) + &e[t - m];
        z.set_column(t, &prev);
    }
    for t in 0..t_len {
        for r in 0..rank {
            let phase = 2.0 * PI * t as f64 / m as f64;
            let seasonal: f64 = (0..HARMONICS)
                .map(|h| amps[(r, h)] * ((h + 1) as f64 * phase + phases[(r, h)]).sin())
                .sum();
            let level = if r == 0 { LEVEL } else { 0.0 };
            x[(r, t)] = level + seasonal + slopes[r] * t as f64 + z[(r, t)];
        }
    }

    let noise = Normal::new(0.0, noise_sd.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let mut full = w.transpose() * &x;
    if noise_sd > 0.0 {
        full.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }
    let mask = DMatrix::from_fn(n, t_len, |_, _| rng.random::<f64>() >= missing_rate);
    let observed = MaskedMatrix::new(full.clone(), mask)?;

    Ok(Synthetic {
        observed,
        full,
        w,
        x,
        coeffs,
    })
}
