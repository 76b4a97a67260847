//! Temporal differencing operators applied matrix-free.
//!
//! For lag `k = 0..=d`, right-multiplying the factor matrix `X` (R x T) by
//! `Ψ_kᵀ` produces the season-`m` differences of `X` shifted back by `k`
//! columns. With zero-based columns, output column `j` is
//!
//! ```text
//! x[d + m + j - k] - x[d + j - k]     (m >= 1)
//! x[d + j - k]                        (m = 0, plain lag selection)
//! ```
//!
//! With `first_order` the seasonal output is additionally first-differenced
//! along columns (`Θ_k = Φ Ψ_k`). Nothing here materializes an operator except
//! [`OperatorFamily::dense_psi`], which exists for oracles.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Cap on `out_cols * T` for [`OperatorFamily::dense_psi`].
pub const DENSE_PSI_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperatorFamily {
    order: usize,
    season: usize,
    len: usize,
    first_order: bool,
}

impl OperatorFamily {
    pub fn build(order: usize, season: usize, len: usize, first_order: bool) -> Result<Self> {
        if order == 0 {
            return Err(Error::Config("VAR order d must be at least 1".into()));
        }
        let needed = order + season + usize::from(first_order);
        if len <= needed {
            return Err(Error::SeriesTooShort {
                order,
                season,
                first_order,
                len,
            });
        }
        Ok(Self {
            order,
            season,
            len,
            first_order,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn season(&self) -> usize {
        self.season
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn first_order(&self) -> bool {
        self.first_order
    }

    /// Same differencing scheme over a different series length.
    pub fn with_len(&self, len: usize) -> Result<Self> {
        Self::build(self.order, self.season, len, self.first_order)
    }

    /// Width of the seasonal stage, before optional first differencing.
    fn seasonal_cols(&self) -> usize {
        self.len - self.order - self.season
    }

    pub fn out_cols(&self) -> usize {
        self.seasonal_cols() - usize::from(self.first_order)
    }

    fn check_lag(&self, k: usize) -> Result<()> {
        if k > self.order {
            Err(Error::Index {
                index: k,
                len: self.order + 1,
            })
        } else {
            Ok(())
        }
    }

    /// `X Ψ_kᵀ` (or `X Ψ_kᵀ Φᵀ` with first-order differencing).
    pub fn apply_psi(&self, x: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
        self.check_lag(k)?;
        if x.ncols() != self.len {
            return Err(Error::Dimension(format!(
                "factor matrix has {} columns, operator expects T={}",
                x.ncols(),
                self.len
            )));
        }
        let (d, m) = (self.order, self.season);
        let seasonal = DMatrix::from_fn(x.nrows(), self.seasonal_cols(), |r, j| {
            let lagged = x[(r, d + j - k)];
            if m == 0 {
                lagged
            } else {
                x[(r, d + m + j - k)] - lagged
            }
        });
        if !self.first_order {
            return Ok(seasonal);
        }
        Ok(DMatrix::from_fn(x.nrows(), self.out_cols(), |r, j| {
            seasonal[(r, j + 1)] - seasonal[(r, j)]
        }))
    }

    /// Adjoint of [`apply_psi`](Self::apply_psi): `G Ψ_k` (or `G Φ Ψ_k`).
    pub fn apply_psi_adjoint(&self, g: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(g.nrows(), self.len);
        self.accumulate_adjoint(g, k, 1.0, &mut out)?;
        Ok(out)
    }

    /// `out += scale * G Ψ_k`, the scatter form used inside the solvers.
    pub(crate) fn accumulate_adjoint(
        &self,
        g: &DMatrix<f64>,
        k: usize,
        scale: f64,
        out: &mut DMatrix<f64>,
    ) -> Result<()> {
        self.check_lag(k)?;
        if g.ncols() != self.out_cols() || out.ncols() != self.len || out.nrows() != g.nrows() {
            return Err(Error::Dimension(format!(
                "adjoint input is {:?}, operator expects {} columns into T={}",
                g.shape(),
                self.out_cols(),
                self.len
            )));
        }
        let seasonal = if self.first_order {
            // Φᵀ scatter: +g at j+1, -g at j.
            let mut s = DMatrix::zeros(g.nrows(), self.seasonal_cols());
            for j in 0..g.ncols() {
                for r in 0..g.nrows() {
                    s[(r, j + 1)] += g[(r, j)];
                    s[(r, j)] -= g[(r, j)];
                }
            }
            s
        } else {
            g.clone()
        };
        let (d, m) = (self.order, self.season);
        for j in 0..seasonal.ncols() {
            let lagged = d + j - k;
            for r in 0..seasonal.nrows() {
                let v = scale * seasonal[(r, j)];
                if m == 0 {
                    out[(r, lagged)] += v;
                } else {
                    out[(r, lagged + m)] += v;
                    out[(r, lagged)] -= v;
                }
            }
        }
        Ok(())
    }

    /// Explicit `out_cols x T` matrix of the lag-`k` operator.
    pub fn dense_psi(&self, k: usize) -> Result<DMatrix<f64>> {
        self.check_lag(k)?;
        let size = self.out_cols() * self.len;
        if size > DENSE_PSI_CAP {
            return Err(Error::TooLarge {
                what: "dense temporal operator",
                size,
                cap: DENSE_PSI_CAP,
            });
        }
        let (d, m) = (self.order, self.season);
        let mut seasonal = DMatrix::zeros(self.seasonal_cols(), self.len);
        for j in 0..self.seasonal_cols() {
            if m == 0 {
                seasonal[(j, d + j - k)] = 1.0;
            } else {
                seasonal[(j, d + j - k)] -= 1.0;
                seasonal[(j, d + m + j - k)] += 1.0;
            }
        }
        if !self.first_order {
            return Ok(seasonal);
        }
        Ok(DMatrix::from_fn(self.out_cols(), self.len, |j, c| {
            seasonal[(j + 1, c)] - seasonal[(j, c)]
        }))
    }
}
