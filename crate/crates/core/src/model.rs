//! Training by alternating minimization.
//!
//! Each outer iteration updates the spatial factors in closed form, refines the
//! temporal factors with a warm-started conjugate-gradient solve, then refits
//! the VAR coefficients by least squares.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::MaskedMatrix;
use crate::error::{Error, Result};
use crate::operators::OperatorFamily;
use crate::solvers::{
    update_coefficients, update_spatial, CgSettings, TemporalProblem, VarCoefficients,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// VAR on season-`m` differenced factors.
    Notmf,
    /// VAR on season-`m` then first-order differenced factors.
    NotmfFirst,
    /// VAR on the undifferenced factors.
    Tmf,
    /// Univariate AR per factor (diagonal coefficient blocks).
    Trmf,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Notmf,
        Variant::NotmfFirst,
        Variant::Tmf,
        Variant::Trmf,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Notmf => "notmf",
            Variant::NotmfFirst => "notmf_first",
            Variant::Tmf => "tmf",
            Variant::Trmf => "trmf",
        }
    }

    pub(crate) fn code(&self) -> u8 {
        match self {
            Variant::Notmf => 0,
            Variant::NotmfFirst => 1,
            Variant::Tmf => 2,
            Variant::Trmf => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "notmf" => Ok(Variant::Notmf),
            "notmf_first" | "notmf_1st" => Ok(Variant::NotmfFirst),
            "tmf" => Ok(Variant::Tmf),
            "trmf" => Ok(Variant::Trmf),
            other => Err(Error::Config(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub rank: usize,
    pub order: usize,
    pub season: usize,
    pub lambda: f64,
    pub rho: f64,
    pub outer_iters: usize,
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub variant: Variant,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            rank: 10,
            order: 2,
            season: 28,
            lambda: 1.0,
            rho: 5.0,
            outer_iters: 50,
            cg_iters: 5,
            cg_tol: 1e-8,
            variant: Variant::Notmf,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Season actually used by the differencing operators.
    pub fn effective_season(&self) -> usize {
        match self.variant {
            Variant::Tmf => 0,
            _ => self.season,
        }
    }

    pub fn first_order(&self) -> bool {
        self.variant == Variant::NotmfFirst
    }

    pub fn diagonal(&self) -> bool {
        self.variant == Variant::Trmf
    }

    pub fn cg_settings(&self) -> CgSettings {
        CgSettings {
            max_iters: self.cg_iters,
            tol: self.cg_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Config("rank must be at least 1".into()));
        }
        if self.order == 0 {
            return Err(Error::Config("order must be at least 1".into()));
        }
        if self.variant == Variant::NotmfFirst && self.season == 0 {
            return Err(Error::Config("notmf_first requires season >= 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("rho must be > 0, got {}", self.rho)));
        }
        if self.cg_iters == 0 {
            return Err(Error::Config("cg_iters must be at least 1".into()));
        }
        if self.cg_tol.is_nan() || self.cg_tol < 0.0 {
            return Err(Error::Config(format!(
                "cg_tol must be >= 0, got {}",
                self.cg_tol
            )));
        }
        Ok(())
    }

    pub fn operator_family(&self, len: usize) -> Result<OperatorFamily> {
        OperatorFamily::build(self.order, self.effective_season(), len, self.first_order())
    }
}

#[derive(Debug, Clone)]
pub struct FactorModel {
    w: DMatrix<f64>,
    x: DMatrix<f64>,
    coeffs: VarCoefficients,
    config: ModelConfig,
    fam: OperatorFamily,
    objective_trace: Vec<f64>,
}

impl FactorModel {
    pub fn from_parts(
        w: DMatrix<f64>,
        x: DMatrix<f64>,
        coeffs: VarCoefficients,
        config: ModelConfig,
        objective_trace: Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        let rank = config.rank;
        if w.nrows() != rank || x.nrows() != rank || coeffs.rank() != rank {
            return Err(Error::Dimension(format!(
                "factor ranks {}/{}/{} disagree with configured rank {rank}",
                w.nrows(),
                x.nrows(),
                coeffs.rank()
            )));
        }
        if coeffs.order() != config.order || coeffs.is_diagonal() != config.diagonal() {
            return Err(Error::Dimension(
                "coefficients disagree with configuration".into(),
            ));
        }
        if w.iter()
            .chain(x.iter())
            .chain(coeffs.stacked().iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite { iteration: 0 });
        }
        let fam = config.operator_family(x.ncols())?;
        Ok(Self {
            w,
            x,
            coeffs,
            config,
            fam,
            objective_trace,
        })
    }

    /// Spatial factors, `R x N`.
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Temporal factors, `R x T`.
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn coeffs(&self) -> &VarCoefficients {
        &self.coeffs
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn operators(&self) -> &OperatorFamily {
        &self.fam
    }

    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    /// `Wᵀ X`, the low-rank reconstruction of the training window.
    pub fn reconstruction(&self) -> DMatrix<f64> {
        self.w.transpose() * &self.x
    }
}

/// Training objective: masked squared reconstruction error, ridge penalties on
/// both factors, and the λ-weighted VAR loss on the differenced factors.
pub fn objective(
    y: &MaskedMatrix,
    w: &DMatrix<f64>,
    x: &DMatrix<f64>,
    coeffs: &VarCoefficients,
    fam: &OperatorFamily,
    lambda: f64,
    rho: f64,
) -> Result<f64> {
    if w.ncols() != y.n_rows() || x.ncols() != y.n_cols() || w.nrows() != x.nrows() {
        return Err(Error::Dimension(format!(
            "W {:?} and X {:?} do not factor a {}x{} matrix",
            w.shape(),
            x.shape(),
            y.n_rows(),
            y.n_cols()
        )));
    }
    if coeffs.rank() != x.nrows() || coeffs.order() != fam.order() {
        return Err(Error::Dimension("coefficients do not match factors".into()));
    }
    let mut fit = 0.0;
    for i in 0..y.n_rows() {
        let wi = w.column(i);
        for &t in y.row_observed(i)? {
            let e = y.values()[(i, t)] - wi.dot(&x.column(t));
            fit += e * e;
        }
    }
    let mut resid = fam.apply_psi(x, 0)?;
    for k in 1..=fam.order() {
        resid.gemm(-1.0, &coeffs.block(k), &fam.apply_psi(x, k)?, 1.0);
    }
    Ok(0.5 * fit
        + 0.5 * rho * (w.norm_squared() + x.norm_squared())
        + 0.5 * lambda * resid.norm_squared())
}

/// Random starting point: `W`, `X` i.i.d. `N(0, 1/R)`, `A = 0`.
pub fn initialize(
    n_rows: usize,
    n_cols: usize,
    config: &ModelConfig,
) -> (DMatrix<f64>, DMatrix<f64>, VarCoefficients) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = 1.0 / (config.rank as f64).sqrt();
    let mut draw = |rows, cols| {
        DMatrix::from_fn(rows, cols, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        })
    };
    let w = draw(config.rank, n_rows);
    let x = draw(config.rank, n_cols);
    let coeffs = VarCoefficients::zeros(config.rank, config.order, config.diagonal());
    (w, x, coeffs)
}

/// Alternating minimization over `(W, X, A)` for `config.outer_iters` rounds.
pub fn fit(y: &MaskedMatrix, config: &ModelConfig) -> Result<FactorModel> {
    config.validate()?;
    let fam = config.operator_family(y.n_cols())?;
    if config.rank >= y.n_rows().min(y.n_cols()) {
        return Err(Error::Config(format!(
            "rank {} must be below min(N, T) = {}",
            config.rank,
            y.n_rows().min(y.n_cols())
        )));
    }
    let (mut w, mut x, mut coeffs) = initialize(y.n_rows(), y.n_cols(), config);
    let mut trace = Vec::with_capacity(config.outer_iters);

    for _ in 0..config.outer_iters {
        w = update_spatial(y, &x, config.rho)?;
        let problem = TemporalProblem::new(y, &w, &coeffs, &fam, config.lambda, config.rho)?;
        x = problem.cgtf(&x, config.cg_settings())?.x;
        coeffs = update_coefficients(&x, &fam, config.diagonal())?;
        let value = objective(y, &w, &x, &coeffs, &fam, config.lambda, config.rho)?;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                iteration: trace.len(),
            });
        }
        trace.push(value);
    }

    FactorModel::from_parts(w, x, coeffs, config.clone(), trace)
}
