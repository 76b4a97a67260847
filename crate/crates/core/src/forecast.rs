//! Forecasting in differenced latent space.
//!
//! Latent columns are seasonally differenced, `v_t = x_{t+m} - x_t`, the VAR
//! is rolled forward on `v` (or on `u_t = v_t - v_{t-1}` with first-order
//! differencing), and the differences are integrated back:
//!
//! ```text
//! x̂_{T+i} = x̃_{T+i-m} + v̂_{T-m+i}
//! ```
//!
//! where `x̃` is the fitted factor for indices up to `T` and the forecast
//! beyond. Once `i > m` forecasts are built on earlier forecasts.

use nalgebra::{DMatrix, DVector};

use crate::data::MaskedMatrix;
use crate::error::{Error, Result};
use crate::model::{fit, FactorModel, ModelConfig};
use crate::solvers::{update_coefficients, TemporalProblem, VarCoefficients};

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    /// `N x (horizon * windows)` forecasts.
    pub values: DMatrix<f64>,
    /// Zero-based time index of the first forecast column.
    pub start_index: usize,
    pub horizon: usize,
    pub windows: usize,
}

/// `δ` future latent columns, `R x δ`.
pub fn forecast_latent(
    x: &DMatrix<f64>,
    coeffs: &VarCoefficients,
    season: usize,
    horizon: usize,
    first_order: bool,
) -> Result<DMatrix<f64>> {
    let rank = x.nrows();
    let len = x.ncols();
    let order = coeffs.order();
    if coeffs.rank() != rank {
        return Err(Error::Dimension(format!(
            "coefficients are rank {}, factors are rank {rank}",
            coeffs.rank()
        )));
    }
    if len < order + season + usize::from(first_order) {
        return Err(Error::SeriesTooShort {
            order,
            season,
            first_order,
            len,
        });
    }

    let mut xs: Vec<DVector<f64>> = x.column_iter().map(|c| c.into_owned()).collect();
    let mut vs: Vec<DVector<f64>> = (0..len - season)
        .map(|t| {
            if season == 0 {
                xs[t].clone()
            } else {
                &xs[t + season] - &xs[t]
            }
        })
        .collect();
    // The series the VAR runs on, indexed like `vs`; entry 0 is unused when
    // first-differencing.
    let mut driven: Vec<DVector<f64>> = if first_order {
        std::iter::once(DVector::zeros(rank))
            .chain(vs.windows(2).map(|w| &w[1] - &w[0]))
            .collect()
    } else {
        vs.clone()
    };

    for _ in 0..horizon {
        let p = vs.len();
        let mut next = DVector::zeros(rank);
        for k in 1..=order {
            next.gemv(1.0, &coeffs.block(k), &driven[p - k], 1.0);
        }
        let v_next = if first_order {
            &vs[p - 1] + &next
        } else {
            next.clone()
        };
        let x_next = if season == 0 {
            v_next.clone()
        } else {
            &xs[p] + &v_next
        };
        driven.push(next);
        vs.push(v_next);
        xs.push(x_next);
    }

    let mut out = DMatrix::zeros(rank, horizon);
    for (i, col) in xs[len..].iter().enumerate() {
        out.set_column(i, col);
    }
    Ok(out)
}

/// `Wᵀ x̂_{T+i}` for `i = 1..=δ`.
pub fn forecast_observations(model: &FactorModel, horizon: usize) -> Result<ForecastResult> {
    let cfg = model.config();
    let latent = forecast_latent(
        model.x(),
        model.coeffs(),
        cfg.effective_season(),
        horizon,
        cfg.first_order(),
    )?;
    Ok(ForecastResult {
        values: model.w().transpose() * latent,
        start_index: model.x().ncols(),
        horizon,
        windows: 1,
    })
}

#[derive(Debug, Clone)]
pub struct RollingOutcome {
    pub forecast: ForecastResult,
    /// State after the last window; `w` is the one learned on the training span.
    pub model: FactorModel,
}

/// Rolling forecasts with a fixed spatial dictionary.
///
/// Trains on the first `train_len` columns and forecasts `horizon` steps.
/// Each following window reveals `horizon` more columns of `y_full`,
/// re-solves the temporal factors by conjugate gradients (warm-started from
/// the previous factors extended by their own forecasts), refits the VAR
/// coefficients, and forecasts the next `horizon` steps.
pub fn rolling_forecast(
    y_full: &MaskedMatrix,
    config: &ModelConfig,
    train_len: usize,
    horizon: usize,
    windows: usize,
) -> Result<RollingOutcome> {
    if horizon == 0 || windows == 0 {
        return Err(Error::Config(
            "horizon and windows must be at least 1".into(),
        ));
    }
    let needed = train_len + horizon * windows;
    if needed > y_full.n_cols() {
        return Err(Error::Dimension(format!(
            "rolling needs {needed} columns ({train_len} + {horizon} x {windows}), data has {}",
            y_full.n_cols()
        )));
    }
    let model = fit(&y_full.columns(0..train_len)?, config)?;
    let season = config.effective_season();
    let first_order = config.first_order();

    let w = model.w().clone();
    let mut x = model.x().clone();
    let mut coeffs = model.coeffs().clone();
    let mut latent = forecast_latent(&x, &coeffs, season, horizon, first_order)?;
    let mut values = DMatrix::zeros(y_full.n_rows(), horizon * windows);
    values
        .columns_mut(0, horizon)
        .copy_from(&(w.transpose() * &latent));

    for s in 1..windows {
        let len = train_len + s * horizon;
        let data = y_full.columns(0..len)?;
        let fam = model.operators().with_len(len)?;
        let mut warm = DMatrix::zeros(x.nrows(), len);
        warm.columns_mut(0, x.ncols()).copy_from(&x);
        warm.columns_mut(x.ncols(), horizon).copy_from(&latent);

        let problem = TemporalProblem::new(&data, &w, &coeffs, &fam, config.lambda, config.rho)?;
        x = problem.cgtf(&warm, config.cg_settings())?.x;
        coeffs = update_coefficients(&x, &fam, config.diagonal())?;
        latent = forecast_latent(&x, &coeffs, season, horizon, first_order)?;
        values
            .columns_mut(s * horizon, horizon)
            .copy_from(&(w.transpose() * &latent));
    }

    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { iteration: 0 });
    }
    let trace = model.objective_trace().to_vec();
    let model = FactorModel::from_parts(w, x, coeffs, config.clone(), trace)?;
    Ok(RollingOutcome {
        forecast: ForecastResult {
            values,
            start_index: train_len,
            horizon,
            windows,
        },
        model,
    })
}
