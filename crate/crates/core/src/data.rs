//! Partially observed data matrices.
//!
//! A [`MaskedMatrix`] stores an `N x T` block of values together with a boolean
//! mask of observed entries. Values at unobserved positions are zeroed on
//! construction so no downstream computation can pick them up.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// How to decide which entries of a dense input are observed.
#[derive(Debug, Clone, PartialEq)]
pub enum MissingRule {
    /// NaN marks a missing entry.
    NanIsMissing,
    /// Exact zero (and NaN) marks a missing entry.
    ZeroIsMissing,
    /// Caller supplies the mask row by row; `true` means observed.
    Explicit(Vec<Vec<bool>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix {
    values: DMatrix<f64>,
    mask: DMatrix<bool>,
    by_row: Vec<Vec<usize>>,
    by_col: Vec<Vec<usize>>,
    observed: usize,
}

impl MaskedMatrix {
    pub fn new(values: DMatrix<f64>, mask: DMatrix<bool>) -> Result<Self> {
        if values.shape() != mask.shape() {
            return Err(Error::Dimension(format!(
                "values are {:?} but mask is {:?}",
                values.shape(),
                mask.shape()
            )));
        }
        let (n, t) = values.shape();
        if n == 0 || t == 0 {
            return Err(Error::Dimension(format!("empty matrix {n}x{t}")));
        }
        let mut values = values;
        let mut by_row = vec![Vec::new(); n];
        let mut by_col = vec![Vec::new(); t];
        let mut observed = 0;
        for col in 0..t {
            for row in 0..n {
                if mask[(row, col)] {
                    if !values[(row, col)].is_finite() {
                        return Err(Error::Config(format!(
                            "non-finite observed value at ({row}, {col})"
                        )));
                    }
                    by_row[row].push(col);
                    by_col[col].push(row);
                    observed += 1;
                } else {
                    values[(row, col)] = 0.0;
                }
            }
        }
        Ok(Self {
            values,
            mask,
            by_row,
            by_col,
            observed,
        })
    }

    /// Builds a matrix from row-major dense input.
    pub fn from_rows(rows: &[Vec<f64>], rule: MissingRule) -> Result<Self> {
        let n = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if n == 0 || t == 0 {
            return Err(Error::Dimension(format!("empty matrix {n}x{t}")));
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != t) {
            return Err(Error::Dimension(format!(
                "row {i} has {} columns, expected {t}",
                row.len()
            )));
        }
        let values = DMatrix::from_fn(n, t, |i, j| rows[i][j]);
        let mask = match rule {
            MissingRule::NanIsMissing => values.map(|v| !v.is_nan()),
            MissingRule::ZeroIsMissing => values.map(|v| !v.is_nan() && v != 0.0),
            MissingRule::Explicit(mask) => {
                if mask.len() != n || mask.iter().any(|r| r.len() != t) {
                    return Err(Error::Dimension(format!(
                        "explicit mask does not match {n}x{t} values"
                    )));
                }
                DMatrix::from_fn(n, t, |i, j| mask[i][j])
            }
        };
        Self::new(values, mask)
    }

    /// Fully observed matrix.
    pub fn dense(values: DMatrix<f64>) -> Result<Self> {
        let mask = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self::new(values, mask)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    /// Stored values; zero at every unobserved position.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn observed_count(&self) -> usize {
        self.observed
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.mask[(row, col)]
    }

    /// Sorted row indices observed in column `col`.
    pub fn column_observed(&self, col: usize) -> Result<&[usize]> {
        self.by_col.get(col).map(Vec::as_slice).ok_or(Error::Index {
            index: col,
            len: self.n_cols(),
        })
    }

    /// Sorted column indices observed in row `row`.
    pub fn row_observed(&self, row: usize) -> Result<&[usize]> {
        self.by_row.get(row).map(Vec::as_slice).ok_or(Error::Index {
            index: row,
            len: self.n_rows(),
        })
    }

    /// `P_Ω(M)`: keeps observed entries of `m`, zeroes the rest.
    pub fn project(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        project(&self.mask, m)
    }

    /// Copy restricted to a contiguous column range.
    pub fn columns(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.n_cols() {
            return Err(Error::Dimension(format!(
                "column range {range:?} invalid for {} columns",
                self.n_cols()
            )));
        }
        let width = range.end - range.start;
        Self::new(
            self.values.columns(range.start, width).into_owned(),
            self.mask.columns(range.start, width).into_owned(),
        )
    }
}

/// Orthogonal projection onto the observed index set.
pub fn project(mask: &DMatrix<bool>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if mask.shape() != m.shape() {
        return Err(Error::Dimension(format!(
            "mask is {:?} but matrix is {:?}",
            mask.shape(),
            m.shape()
        )));
    }
    Ok(m.zip_map(mask, |v, keep| if keep { v } else { 0.0 }))
}
