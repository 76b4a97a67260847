//! Temporal-factor subproblem.
//!
//! With `W`, `A` fixed, the optimal `X` solves the generalized Sylvester
//! equation `L(X) = W P_Ω(Y)` where
//!
//! ```text
//! L(X) = W P_Ω(WᵀX) + λ Σ_k A_kᵀ (Σ_h A_h X Ψ_hᵀ) Ψ_k + ρX,   A_0 = -I.
//! ```
//!
//! [`TemporalProblem::cgtf`] solves it by conjugate gradients on the matrix
//! form. [`TemporalProblem::oracle_x`] builds the vectorized system densely
//! and factorizes it; it is only meant for small instances.

use nalgebra::{DMatrix, DVector};

use super::VarCoefficients;
use crate::data::MaskedMatrix;
use crate::error::{Error, Result};
use crate::operators::OperatorFamily;

/// Largest `R * T` the dense oracle accepts.
pub const ORACLE_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    pub max_iters: usize,
    /// Stop once the residual norm falls to `tol` times the initial residual.
    pub tol: f64,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self {
            max_iters: 5,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: DMatrix<f64>,
    /// Updates actually applied to the warm start.
    pub iterations: usize,
    /// Residual Frobenius norms, starting with the warm-start residual.
    pub residual_norms: Vec<f64>,
}

/// The `X`-update system for fixed data, spatial factors, and coefficients.
pub struct TemporalProblem<'a> {
    data: &'a MaskedMatrix,
    w: &'a DMatrix<f64>,
    coeffs: &'a VarCoefficients,
    fam: &'a OperatorFamily,
    lambda: f64,
    rho: f64,
    /// `S_t = Σ_{i observed at t} w_i w_iᵀ`, one block per column.
    blocks: Vec<DMatrix<f64>>,
}

impl<'a> TemporalProblem<'a> {
    pub fn new(
        data: &'a MaskedMatrix,
        w: &'a DMatrix<f64>,
        coeffs: &'a VarCoefficients,
        fam: &'a OperatorFamily,
        lambda: f64,
        rho: f64,
    ) -> Result<Self> {
        let rank = w.nrows();
        if w.ncols() != data.n_rows() {
            return Err(Error::Dimension(format!(
                "spatial factors have {} columns, data has {} rows",
                w.ncols(),
                data.n_rows()
            )));
        }
        if fam.len() != data.n_cols() {
            return Err(Error::Dimension(format!(
                "operator built for T={}, data has {} columns",
                fam.len(),
                data.n_cols()
            )));
        }
        if coeffs.rank() != rank || coeffs.order() != fam.order() {
            return Err(Error::Dimension(format!(
                "coefficients are rank {} order {}, expected rank {rank} order {}",
                coeffs.rank(),
                coeffs.order(),
                fam.order()
            )));
        }
        if !(lambda >= 0.0 && rho >= 0.0) {
            return Err(Error::Config(format!(
                "lambda and rho must be non-negative, got {lambda}, {rho}"
            )));
        }
        let blocks = (0..data.n_cols())
            .map(|t| {
                let mut s = DMatrix::zeros(rank, rank);
                for &i in data.column_observed(t)? {
                    let wi = w.column(i);
                    s.syger(1.0, &wi, &wi, 1.0);
                }
                s.fill_upper_triangle_with_lower_triangle();
                Ok(s)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            data,
            w,
            coeffs,
            fam,
            lambda,
            rho,
            blocks,
        })
    }

    pub fn rank(&self) -> usize {
        self.w.nrows()
    }

    /// Right-hand side `W P_Ω(Y)`.
    pub fn rhs(&self) -> DMatrix<f64> {
        // Stored values are already zero off the mask.
        self.w * self.data.values()
    }

    /// Applies the operator `L` to `x`.
    pub fn apply_lx(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.shape() != (self.rank(), self.fam.len()) {
            return Err(Error::Dimension(format!(
                "temporal factors are {:?}, expected {}x{}",
                x.shape(),
                self.rank(),
                self.fam.len()
            )));
        }
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (t, s) in self.blocks.iter().enumerate() {
            out.column_mut(t).gemv(1.0, s, &x.column(t), 0.0);
        }
        if self.lambda != 0.0 {
            let resid = self.var_residual(x)?;
            self.fam
                .accumulate_adjoint(&resid, 0, -self.lambda, &mut out)?;
            for k in 1..=self.fam.order() {
                let back = self.coeffs.block(k).transpose() * &resid;
                self.fam
                    .accumulate_adjoint(&back, k, self.lambda, &mut out)?;
            }
        }
        add_scaled(&mut out, self.rho, x);
        Ok(out)
    }

    /// `Σ_h A_h X Ψ_hᵀ` with `A_0 = -I`.
    fn var_residual(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut resid = -self.fam.apply_psi(x, 0)?;
        for k in 1..=self.fam.order() {
            let lagged = self.fam.apply_psi(x, k)?;
            resid.gemm(1.0, &self.coeffs.block(k), &lagged, 1.0);
        }
        Ok(resid)
    }

    /// Conjugate gradients on `L(X) = W P_Ω(Y)` from the warm start `x0`.
    pub fn cgtf(&self, x0: &DMatrix<f64>, settings: CgSettings) -> Result<CgSolution> {
        if settings.max_iters == 0 {
            return Err(Error::Config(
                "conjugate-gradient iterations must be >= 1".into(),
            ));
        }
        if self.rho <= 0.0 {
            return Err(Error::Config(format!(
                "conjugate gradients require rho > 0, got {}",
                self.rho
            )));
        }
        let mut x = x0.clone();
        let mut r = self.rhs() - self.apply_lx(&x)?;
        let mut rr = r.norm_squared();
        if !rr.is_finite() {
            return Err(Error::NonFinite { iteration: 0 });
        }
        let initial = rr.sqrt();
        let mut norms = vec![initial];
        let mut q = r.clone();
        let mut iterations = 0;

        while iterations < settings.max_iters && rr > 0.0 && rr.sqrt() > settings.tol * initial {
            let lq = self.apply_lx(&q)?;
            let curvature = q.dot(&lq);
            let alpha = rr / curvature;
            if !alpha.is_finite() {
                return Err(Error::NonFinite {
                    iteration: iterations,
                });
            }
            add_scaled(&mut x, alpha, &q);
            add_scaled(&mut r, -alpha, &lq);
            let rr_next = r.norm_squared();
            if !rr_next.is_finite() {
                return Err(Error::NonFinite {
                    iteration: iterations,
                });
            }
            let beta = rr_next / rr;
            q *= beta;
            q += &r;
            rr = rr_next;
            iterations += 1;
            norms.push(rr.sqrt());
        }

        Ok(CgSolution {
            x,
            iterations,
            residual_norms: norms,
        })
    }

    /// Dense solve of the vectorized system. Refuses `R * T > ORACLE_CAP`.
    pub fn oracle_x(&self) -> Result<DMatrix<f64>> {
        let rank = self.rank();
        let len = self.fam.len();
        let n = rank * len;
        if n > ORACLE_CAP {
            return Err(Error::TooLarge {
                what: "vectorized temporal system",
                size: n,
                cap: ORACLE_CAP,
            });
        }
        // vec() is column-major, so column t of X occupies rows t*R .. (t+1)*R.
        let mut system = DMatrix::from_diagonal_element(n, n, self.rho);
        for (t, s) in self.blocks.iter().enumerate() {
            let mut view = system.view_mut((t * rank, t * rank), (rank, rank));
            view += s;
        }
        if self.lambda != 0.0 {
            // Σ_k Σ_h (Ψ_k ⊗ A_k)ᵀ (Ψ_h ⊗ A_h) = Bᵀ B with B = Σ_k Ψ_k ⊗ A_k.
            let mut stacked = self
                .fam
                .dense_psi(0)?
                .kronecker(&(-DMatrix::<f64>::identity(rank, rank)));
            for k in 1..=self.fam.order() {
                stacked += self
                    .fam
                    .dense_psi(k)?
                    .kronecker(&self.coeffs.block(k).into_owned());
            }
            system.gemm_tr(self.lambda, &stacked, &stacked, 1.0);
        }
        let rhs = DVector::from_column_slice(self.rhs().as_slice());
        let chol = system
            .cholesky()
            .ok_or_else(|| Error::Singular("vectorized temporal system".into()))?;
        let sol = chol.solve(&rhs);
        Ok(DMatrix::from_column_slice(rank, len, sol.as_slice()))
    }
}

/// `y += a * x` over matching shapes.
fn add_scaled(y: &mut DMatrix<f64>, a: f64, x: &DMatrix<f64>) {
    for (yi, xi) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yi += a * xi;
    }
}
