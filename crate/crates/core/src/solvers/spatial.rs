use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::MaskedMatrix;
use crate::error::{Error, Result};

/// Closed-form spatial update.
///
/// Column `i` of the returned `R x N` matrix is the ridge solution
/// `(Σ_t x_t x_tᵀ + ρI)⁻¹ Σ_t x_t y_it` over the columns observed in row `i`.
/// Rows with no observations get a zero column.
pub fn update_spatial(y: &MaskedMatrix, x: &DMatrix<f64>, rho: f64) -> Result<DMatrix<f64>> {
    if x.ncols() != y.n_cols() {
        return Err(Error::Dimension(format!(
            "temporal factors have {} columns, data has {}",
            x.ncols(),
            y.n_cols()
        )));
    }
    if rho < 0.0 {
        return Err(Error::Config(format!(
            "rho must be non-negative, got {rho}"
        )));
    }
    let rank = x.nrows();
    let columns: Vec<DVector<f64>> = (0..y.n_rows())
        .into_par_iter()
        .map(|i| solve_row(y, x, rho, rank, i))
        .collect::<Result<_>>()?;

    let mut w = DMatrix::zeros(rank, y.n_rows());
    for (i, col) in columns.iter().enumerate() {
        w.set_column(i, col);
    }
    Ok(w)
}

fn solve_row(
    y: &MaskedMatrix,
    x: &DMatrix<f64>,
    rho: f64,
    rank: usize,
    row: usize,
) -> Result<DVector<f64>> {
    let observed = y.row_observed(row)?;
    if observed.is_empty() {
        return Ok(DVector::zeros(rank));
    }
    let mut gram = DMatrix::from_diagonal_element(rank, rank, rho);
    let mut rhs = DVector::zeros(rank);
    for &t in observed {
        let xt = x.column(t);
        gram.syger(1.0, &xt, &xt, 1.0);
        rhs.axpy(y.values()[(row, t)], &xt, 1.0);
    }
    gram.fill_upper_triangle_with_lower_triangle();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("spatial system for row {row}")))?;
    Ok(chol.solve(&rhs))
}
