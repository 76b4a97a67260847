//! Temporal matrix factorization with seasonally differenced VAR regularization.
//!
//! A partially observed `N x T` matrix `Y` is approximated by `WᵀX` with
//! spatial factors `W` (`R x N`) and temporal factors `X` (`R x T`). The
//! temporal factors are regularized by a VAR(`d`) process on their season-`m`
//! differences (optionally followed by a first difference). Training
//! alternates a closed-form `W` update, a conjugate-gradient `X` update, and a
//! least-squares coefficient update; forecasts roll the VAR forward and undo
//! the differencing.

pub mod archive;
pub mod data;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod model;
pub mod operators;
pub mod solvers;

pub use data::{MaskedMatrix, MissingRule};
pub use error::{Error, Result};
pub use forecast::{
    forecast_latent, forecast_observations, rolling_forecast, ForecastResult, RollingOutcome,
};
pub use model::{fit, objective, FactorModel, ModelConfig, Variant};
pub use operators::OperatorFamily;
pub use solvers::{
    update_coefficients, update_spatial, CgSettings, CgSolution, TemporalProblem, VarCoefficients,
};
