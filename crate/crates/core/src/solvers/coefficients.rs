use nalgebra::DMatrix;

use super::VarCoefficients;
use crate::error::{Error, Result};
use crate::operators::OperatorFamily;

/// Singular values below `σ_max · RCOND · max(rows, cols)` are treated as zero.
const RCOND: f64 = 1e-12;

/// Least-squares VAR coefficients for the differenced temporal factors.
///
/// Minimizes `‖X Ψ_0ᵀ - A (I_d ⊗ X) Ψᵀ‖_F`. The regularization weight λ scales
/// the whole loss and so does not affect the minimizer. With `diagonal` each
/// block `A_k` is restricted to a diagonal and every factor is regressed on its
/// own lags only.
pub fn update_coefficients(
    x: &DMatrix<f64>,
    fam: &OperatorFamily,
    diagonal: bool,
) -> Result<VarCoefficients> {
    let rank = x.nrows();
    let d = fam.order();
    if fam.out_cols() == 0 {
        return Err(Error::Config("no differenced columns to regress on".into()));
    }
    let target = fam.apply_psi(x, 0)?;
    let lagged = (1..=d)
        .map(|k| fam.apply_psi(x, k))
        .collect::<Result<Vec<_>>>()?;

    if !diagonal {
        let mut regressors = DMatrix::zeros(d * rank, fam.out_cols());
        for (k, block) in lagged.iter().enumerate() {
            regressors.rows_mut(k * rank, rank).copy_from(block);
        }
        let stacked = least_squares_rows(&target, &regressors);
        return VarCoefficients::new(stacked, d, false);
    }

    let mut stacked = DMatrix::zeros(rank, d * rank);
    for r in 0..rank {
        let own_target = target.rows(r, 1).into_owned();
        let own_lags = DMatrix::from_fn(d, fam.out_cols(), |k, j| lagged[k][(r, j)]);
        let coef = least_squares_rows(&own_target, &own_lags);
        for k in 0..d {
            stacked[(r, k * rank + r)] = coef[(0, k)];
        }
    }
    VarCoefficients::new(stacked, d, true)
}

/// Minimum-norm `B` minimizing `‖target - B regressors‖_F`, one row of `B` per
/// row of `target`.
///
/// Solved through an SVD of the design rather than the normal equations, so
/// accuracy degrades with the condition number of the regressors and not its
/// square. Rank-deficient designs get the minimum-norm solution.
pub(crate) fn least_squares_rows(target: &DMatrix<f64>, regressors: &DMatrix<f64>) -> DMatrix<f64> {
    let p = regressors.nrows();
    let design = regressors.transpose();
    let top = design.amax();
    if top == 0.0 || !top.is_finite() {
        return DMatrix::zeros(target.nrows(), p);
    }
    let svd = design.svd(true, true);
    let cutoff =
        svd.singular_values.max() * RCOND * regressors.nrows().max(regressors.ncols()) as f64;
    match svd.solve(&target.transpose(), cutoff) {
        Ok(sol) => sol.transpose(),
        Err(_) => DMatrix::zeros(target.nrows(), p),
    }
}
